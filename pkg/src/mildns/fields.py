"""Spectral vector fields and the pseudo-spectral operator toolbox.

Leray projection, divergence/gradient, 2/3-rule dealiasing and the two
nonlinear terms (plain and mollified) all act on the rfft half spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .grid import Grid3

DIV_TOL = 1e-10  # per-mode relative solenoidality tolerance


@dataclass
class FourierMultiplier:
    """Diagonal operator in Fourier space: (M f)^(xi) = m(xi) f^(xi)."""

    grid: Grid3
    values: np.ndarray  # broadcastable against the spectral shape
    label: str = ""

    def __mul__(self, other: "FourierMultiplier") -> "FourierMultiplier":
        if self.grid != other.grid:
            raise ValueError("multiplier grids differ")
        return FourierMultiplier(
            self.grid, self.values * other.values, f"{self.label}*{other.label}"
        )

    def apply(self, f: "SpectralVectorField") -> "SpectralVectorField":
        return replace(f, coeffs=f.coeffs * self.values)

    def apply_scalar(self, coeffs: np.ndarray) -> np.ndarray:
        return coeffs * self.values


@dataclass
class SpectralVectorField:
    """Three-component real velocity field stored as rfft coefficients."""

    grid: Grid3
    coeffs: np.ndarray  # shape (3,) + grid.spectral_shape, complex
    is_solenoidal: bool = False

    @classmethod
    def from_physical(cls, grid: Grid3, samples: np.ndarray) -> "SpectralVectorField":
        if samples.shape != (3,) + grid.physical_shape:
            raise ValueError(
                f"expected samples of shape {(3,) + grid.physical_shape}, "
                f"got {samples.shape}"
            )
        return cls(grid, grid.forward(samples))

    @classmethod
    def zero(cls, grid: Grid3) -> "SpectralVectorField":
        return cls(grid, np.zeros((3,) + grid.spectral_shape, dtype=complex), True)

    def to_physical(self) -> np.ndarray:
        return self.grid.backward(self.coeffs)

    def copy(self) -> "SpectralVectorField":
        return SpectralVectorField(self.grid, self.coeffs.copy(), self.is_solenoidal)

    def l2_norm(self) -> float:
        return float(np.sqrt(sum(self.grid.spectral_energy(c) for c in self.coeffs)))

    def max_divergence_ratio(self) -> float:
        """max over modes of |xi . u^| / (|xi| |u^|), zero mode excluded."""
        g = self.grid
        div = np.abs(divergence(self))
        mag = np.sqrt(np.sum(np.abs(self.coeffs) ** 2, axis=0))
        kmag = np.sqrt(g.k_sq)
        denom = np.where(mag > 0, mag, 1.0) * np.where(kmag > 0, kmag, 1.0)
        ratio = div / denom
        ratio[0, 0, 0] = 0.0
        return float(ratio.max())


def transform_forward(grid: Grid3, samples: np.ndarray) -> SpectralVectorField:
    return SpectralVectorField.from_physical(grid, samples)


def transform_backward(f: SpectralVectorField) -> np.ndarray:
    return f.to_physical()


def divergence(f: SpectralVectorField) -> np.ndarray:
    """(div f)^(xi) = i xi . f^(xi), returned as a scalar spectrum."""
    g = f.grid
    return 1j * (g.kx * f.coeffs[0] + g.ky * f.coeffs[1] + g.kz * f.coeffs[2])


def gradient(grid: Grid3, phi_coeffs: np.ndarray) -> SpectralVectorField:
    """(grad phi)^(xi) = i xi phi^(xi)."""
    c = np.stack(
        [1j * grid.kx * phi_coeffs, 1j * grid.ky * phi_coeffs, 1j * grid.kz * phi_coeffs]
    )
    return SpectralVectorField(grid, c)


def leray_project(f: SpectralVectorField) -> SpectralVectorField:
    """Project onto divergence-free fields: f^ - xi (xi . f^)/|xi|^2.

    The zero mode is preserved (mean flow passes through); experiments
    construct mean-free data so this choice is never exercised.
    """
    g = f.grid
    ksq = g.k_sq.copy()
    ksq[0, 0, 0] = 1.0  # keep the mean untouched
    kdotf = g.kx * f.coeffs[0] + g.ky * f.coeffs[1] + g.kz * f.coeffs[2]
    kdotf[0, 0, 0] = 0.0
    scale = kdotf / ksq
    out = np.stack(
        [
            f.coeffs[0] - g.kx * scale,
            f.coeffs[1] - g.ky * scale,
            f.coeffs[2] - g.kz * scale,
        ]
    )
    return SpectralVectorField(g, out, is_solenoidal=True)


def dealias_mask(grid: Grid3) -> np.ndarray:
    """2/3-rule mask: keep modes with max_j |xi_j| <= (2/3) xi_max."""
    cutoff = (2.0 / 3.0) * (2 * np.pi / grid.length) * (grid.n / 2)
    tol = 1e-12 * cutoff
    return (
        (np.abs(grid.kx) <= cutoff + tol)
        & (np.abs(grid.ky) <= cutoff + tol)
        & (np.abs(grid.kz) <= cutoff + tol)
    )


def dealias(f: SpectralVectorField) -> SpectralVectorField:
    return replace(f, coeffs=f.coeffs * dealias_mask(f.grid))


def _tensor_divergence(grid: Grid3, uv_hat: np.ndarray) -> np.ndarray:
    """i xi_k (u_i v_k)^ contraction; uv_hat has shape (3, 3) + spectral."""
    kvecs = (grid.kx, grid.ky, grid.kz)
    out = np.empty((3,) + grid.spectral_shape, dtype=complex)
    for i in range(3):
        out[i] = 1j * (
            kvecs[0] * uv_hat[i, 0] + kvecs[1] * uv_hat[i, 1] + kvecs[2] * uv_hat[i, 2]
        )
    return out


def nonlinear_term(u: SpectralVectorField, v: SpectralVectorField) -> SpectralVectorField:
    """P div (u (x) v), computed pseudo-spectrally with 2/3 dealiasing."""
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    g = u.grid
    up = u.to_physical()
    vp = v.to_physical()
    uv_hat = np.empty((3, 3) + g.spectral_shape, dtype=complex)
    for i in range(3):
        for k in range(3):
            uv_hat[i, k] = g.forward(up[i] * vp[k])
    out = SpectralVectorField(g, _tensor_divergence(g, uv_hat))
    return leray_project(dealias(out))


def mollified_nonlinear_term(
    u: SpectralVectorField, v: SpectralVectorField, mollifier: FourierMultiplier
) -> SpectralVectorField:
    """P div ((u * omega_kappa) (x) v): u is smoothed before the product."""
    return nonlinear_term(mollifier.apply(u), v)


def l2_inner(f: SpectralVectorField, h: SpectralVectorField) -> float:
    """L^2 inner product sum_i <f_i, h_i> via the half spectrum."""
    g = f.grid
    prod = (f.coeffs * np.conj(h.coeffs)).real * g.hermitian_weight
    return float(prod.sum()) * g.cell_volume / g.n**3
