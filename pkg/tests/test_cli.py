import csv
import json

import pytest

from confluence.cli import ExperimentConfig, main, resolve_family
from confluence.errors import ConfigError


def _read(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


def test_selftest_passes(tmp_path, capsys):
    assert main(["selftest", "--out", str(tmp_path)]) == 0
    assert "selftest:" in capsys.readouterr().out
    rows = _read(tmp_path / "selftest.csv")
    assert rows[0] == ["check", "value", "tol", "status"]
    assert all(r[3] == "pass" for r in rows[1:])
    assert (tmp_path / "selftest.svg").read_text().startswith("<svg")
    assert "slope" in json.loads((tmp_path / "selftest_fit.json").read_text())


def test_malformed_family_file(tmp_path, capsys):
    bad = tmp_path / "bad.fam"
    bad.write_text("n = 2\nalphac 0,1\n")
    assert main(["monodromy", "--family", str(bad), "--out", str(tmp_path)]) == 2
    assert capsys.readouterr().err.startswith("ParseError:2")


@pytest.mark.parametrize("args", [["--ratio", "2"], ["--count", "1"], ["--eps0", "-0.1"],
                                  ["--t0", "0,0"], ["--family", "no-such-family"]])
def test_config_errors(tmp_path, capsys, args):
    assert main(["monodromy", "--out", str(tmp_path), *args]) == 2
    assert capsys.readouterr().err.startswith("error:ConfigError:")


def test_bad_log_level(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("STOKES_LOG", "loud")
    assert main(["selftest", "--out", str(tmp_path)]) == 2
    assert "STOKES_LOG" in capsys.readouterr().err


def test_unknown_command_is_usage_error(capsys):
    assert main(["frobnicate"]) == 2


def test_config_validation_direct():
    assert ExperimentConfig("t3").validate().eps_grid()[:2] == [0.4, 0.2]
    with pytest.raises(ConfigError):
        ExperimentConfig("t3", tol=0).validate()
    assert resolve_family("typical").n == 2


def test_commutator_output_is_deterministic(tmp_path):
    args = ["commutator", "--family", "t3", "--eps0", "0.4", "--count", "3"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([*args, "--out", str(a)]) == 0
    assert main([*args, "--out", str(b)]) == 0
    assert (a / "commutator.csv").read_bytes() == (b / "commutator.csv").read_bytes()
    rows = _read(a / "commutator.csv")
    head = rows[0]
    assert head[0] == "eps" and head[-2:] == ["distance_to_C0", "distance_to_C1"]
    assert len(rows) == 4 and all(len(r) == len(head) for r in rows)
    dist = [float(r[head.index("distance_to_C0")]) for r in rows[1:]]
    assert dist[-1] < dist[0]
    fit = json.loads((a / "commutator_fit.json").read_text())
    assert fit["quantity"] == "distance_to_C0" and fit["slope"] > 0


def test_stokes_command(tmp_path):
    assert main(["stokes", "--family", "t3", "--out", str(tmp_path)]) == 0
    rows = {r[0]: r[1:] for r in _read(tmp_path / "stokes.csv")}
    c0 = complex(float(rows["c0"][0]), float(rows["c0"][1]))
    assert abs(c0 + 1.6180339887498949j) < 1e-8


def test_divergence_command(tmp_path):
    args = ["divergence", "--family", "typical", "--eps0", "0.4", "--count", "2", "--words", "ab,aB",
            "--samples", "3", "--out", str(tmp_path)]
    assert main(args) == 0
    rows = _read(tmp_path / "divergence.csv")
    assert rows[0][:4] == ["word", "eps", "norm", "log10_norm"]
    assert len(rows) == 1 + 2 * 2
    fit = json.loads((tmp_path / "divergence_fit.json").read_text())
    assert "min_log10_growth_reduced" in fit
