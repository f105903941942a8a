import csv
import json
import xml.etree.ElementTree as ET
from pathlib import Path

import pytest

from _golden import assert_csv_matches
from confspec import cli
from confspec.functionals import MinMaxViolation

DATA = Path(__file__).parent / "data"


def run(*argv):
    return cli.main([str(a) for a in argv])


def test_spectrum_golden(tmp_path, capsys):
    assert run("spectrum", "--L", 8, "--out", tmp_path) == 0
    assert "pass" in capsys.readouterr().out
    text = (tmp_path / "results.csv").read_text(encoding="utf-8")
    assert_csv_matches(text, (DATA / "cli_spectrum_round_L8.csv").read_text(encoding="utf-8"))
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "spectrum" and man["config"]["seed"] == 0 and man["config"]["L"] == 8
    assert "trust_tol" in man["tolerances"] and "numpy" in man["versions"]


def test_spectrum_isospectral_run(tmp_path):
    assert run("spectrum", "--family", "bubble:t=1.5", "--L", 40, "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "results.csv", encoding="utf-8")))
    assert abs(float(rows[0]["eigenvalue"]) - 0.75) < 1e-8


@pytest.mark.parametrize("argv", [
    ("spectrum", "--family", "poly:coeffs=-1,0.2"),
    ("sweep", "--family", ""),
    ("spectrum", "--n", 2),
    ("certify", "--k", "0"),
    ("spectrum", "--family", "bogus:t=1"),
])
def test_invalid_input_exit_codes(tmp_path, capsys, argv):
    assert run(*argv, "--out", tmp_path) == 2
    assert "error" in capsys.readouterr().err


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# spectrum run\nL = 6\nfamily = constant:c=2\nseed = 5\n", encoding="utf-8")
    assert run("spectrum", "--config", cfg, "--L", 7, "--out", tmp_path / "o") == 0
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["config"]["L"] == 7 and man["config"]["seed"] == 5
    assert man["config"]["family"] == "constant:c=2"
    bad = tmp_path / "bad.cfg"
    bad.write_text("no equals sign\n", encoding="utf-8")
    assert run("spectrum", "--config", bad, "--out", tmp_path / "p") == 2


def test_testfn_command(tmp_path, capsys):
    assert run("testfn", "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 8


def test_cover_command(tmp_path, capsys):
    assert run("cover", "--k", "1,4", "--out", tmp_path) == 0
    out = capsys.readouterr().out
    assert "doubling estimate" in out and "FAIL" not in out
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["doubling"] <= 8 * 1.15


def test_cover_concentrated_mass(tmp_path, capsys):
    assert run("cover", "--family", "bubble:t=50", "--k", 32, "--out", tmp_path) == 2
    assert "too concentrated" in capsys.readouterr().out


def test_certify_command(tmp_path):
    assert run("certify", "--k", "1,5", "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "results.csv", encoding="utf-8")))
    assert [int(r["k"]) for r in rows] == [1, 5]
    assert all(float(r["certified_bound"]) >= float(r["solver_value"]) for r in rows)
    reports = json.loads((tmp_path / "reports.json").read_text())
    assert reports[1]["index_zero_based"] == 4


def test_certify_min_max_violation(tmp_path, monkeypatch):
    def boom(*a, **kw):
        raise MinMaxViolation("forced")

    monkeypatch.setattr(cli, "certify_upper_bound", boom)
    assert run("certify", "--k", 1, "--out", tmp_path) == 3


def test_sweep_command(tmp_path):
    assert run("sweep", "--family", "constant:c=1,2;two_bubble:t=1.5,2,3", "--k", "1-5", "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "results.csv", encoding="utf-8")))
    assert len(rows) == 25
    assert list(rows[0]) == ["family", "params", "n", "k", "lambda_k", "lambda_bar_k", "ratio",
                             "volume_normalized", "certified_bound", "hersch_gap"]
    # constant family: lambda_bar_k does not depend on c
    const = [r for r in rows if r["family"] == "constant"]
    assert [r["lambda_bar_k"][:12] for r in const[:5]] == [r["lambda_bar_k"][:12] for r in const[5:]]
    for name in ("ratio_vs_k.svg", "functional_vs_t.svg"):
        root = ET.parse(tmp_path / "plots" / name).getroot()
        assert root.tag.endswith("svg")
        assert len(root.findall("{http://www.w3.org/2000/svg}polyline")) >= 2


def test_hersch_command(tmp_path):
    assert run("hersch", "--count", 4, "--seed", 2, "--out", tmp_path) == 0
    rows = list(csv.DictReader(open(tmp_path / "results.csv", encoding="utf-8")))
    assert len(rows) == 4 and all(r["passed"] == "True" for r in rows)


def test_parse_k_list():
    assert cli.parse_k_list("1,3-5, 8") == [1, 3, 4, 5, 8]
