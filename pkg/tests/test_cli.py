import json

import pytest

from mildns.cli import config_hash, load_config, main


def test_defaults_without_file():
    cfg = load_config(None, "landau")
    assert cfg["n_samples"] == 100
    assert cfg["residual_tol"] == 1e-7


def test_ini_overrides(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text("[landau]\nn_samples = 17\nh = 5e-4\n")
    cfg = load_config(str(path), "landau")
    assert cfg["n_samples"] == 17
    assert cfg["h"] == 5e-4
    assert cfg["residual_tol"] == 1e-7  # untouched default


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "cfg.ini"
    path.write_text("[landau]\nbogus = 1\n")
    with pytest.raises(KeyError):
        load_config(str(path), "landau")


def test_config_hash_sensitivity():
    a = load_config(None, "landau")
    b = dict(a, h=2e-3)
    assert config_hash("landau", a) == config_hash("landau", a)
    assert config_hash("landau", a) != config_hash("landau", b)
    assert config_hash("landau", a) != config_hash("norms", a)


def test_landau_subcommand_passes(tmp_path):
    out = tmp_path / "out"
    code = main(["landau", "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["experiment"] == "landau"
    assert all(c["passed"] for c in report["criteria"])
    csv = (out / "landau.csv").read_text()
    assert csv.startswith("c,max_residual,max_divergence\n")
    assert f"# config={report['config_hash']}" in csv


def test_norms_selftest_passes(tmp_path):
    out = tmp_path / "out"
    code = main(["norms-selftest", "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert len(report["criteria"]) == 4


def test_rerun_is_byte_identical(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["landau", "--out", str(out1), "--seed", "3"]) == 0
    assert main(["landau", "--out", str(out2), "--seed", "3"]) == 0
    assert (out1 / "landau.csv").read_bytes() == (out2 / "landau.csv").read_bytes()


def test_seed_changes_samples_not_pass(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["landau", "--out", str(out1), "--seed", "1"]) == 0
    assert main(["landau", "--out", str(out2), "--seed", "2"]) == 0
    assert (out1 / "landau.csv").read_bytes() != (out2 / "landau.csv").read_bytes()


def test_threads_flag(tmp_path):
    out = tmp_path / "out"
    assert main(["norms-selftest", "--out", str(out), "--threads", "1"]) == 0


def test_failure_exit_code(tmp_path):
    # an unreachable tolerance must surface as a nonzero exit
    cfg = tmp_path / "cfg.ini"
    cfg.write_text("[landau]\nresidual_tol = 1e-12\n")
    out = tmp_path / "out"
    code = main(["landau", "--config", str(cfg), "--out", str(out)])
    assert code == 1
    report = json.loads((out / "report.json").read_text())
    assert any(not c["passed"] for c in report["criteria"])
