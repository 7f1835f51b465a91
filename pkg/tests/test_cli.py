import csv

import pytest

from horncrit.cli import effective_config, main
from horncrit.io import dump_config, format_value, parse_config, write_csv

HORN = ["--l", "1", "--m", "2", "--profile", "power", "--gamma", "0.5"]


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(3) == "3" and format_value(True) == "true"
    assert float(format_value(1 / 3)) == 1 / 3


def test_parse_config():
    cfg = parse_config("# header\nl = 1\nprofile=power  # family\n\ngamma=0.5\n")
    assert cfg == {"l": "1", "profile": "power", "gamma": "0.5"}
    with pytest.raises(ValueError, match="line 1"):
        parse_config("nonsense\n")


def test_dump_config_round_trip():
    cfg = {"a": 0.1, "b": "x", "c": [1.0, 2.5], "d": None, "e": 3}
    text = dump_config(cfg)
    assert "d=" not in text
    back = parse_config(text)
    assert float(back["a"]) == 0.1 and back["c"] == "1.0,2.5" and back["e"] == "3"
    with pytest.raises(ValueError):
        dump_config({"k": "a#b"})


def test_write_csv(tmp_path):
    p = tmp_path / "x.csv"
    write_csv(p, ["a", "b"], [[1, 0.5], ["t", float("nan")]])
    assert p.read_bytes() == b"a,b\r\n1,0.5\r\nt,nan\r\n"


def test_classify_boundary_case(capsys):
    assert main(["classify", *HORN]) == 0
    assert capsys.readouterr().out.strip() == "recurrent"


def test_classify_transient_and_volume(capsys):
    assert main(["classify", "--l", "1", "--m", "2", "--profile", "power", "--gamma", "0.75"]) == 0
    assert capsys.readouterr().out.strip() == "transient"
    assert main(["classify", "--volume", "--l", "1", "--m", "2", "--profile", "power",
                 "--gamma", "-1"]) == 0
    assert capsys.readouterr().out.strip() == "positive-recurrent"


def test_classify_with_sign(capsys):
    assert main(["classify", *HORN, "--sign", "plus"]) == 0
    assert capsys.readouterr().out.split() == ["recurrent", "f+", "diverging"]


@pytest.mark.parametrize("argv", [
    ["classify", "--l", "1", "--m", "2", "--profile", "power", "--gamma", "abc"],
    ["classify", *HORN, "--volume", "--sign", "plus"],
    ["classify", *HORN, "--frobnicate"],
    ["classify", "--l", "1", "--m", "1", "--profile", "power", "--gamma", "0.5"],
    ["classify", "--l", "1", "--m", "2", "--profile", "power"],
    ["classify", "--l", "1", "--m", "2"],
    ["nosuchcommand"],
    [],
    ["experiment", "localtime"],
    ["simulate", *HORN, "--start-rho", "6", "--inner", "1", "--outer", "5"],
    ["capacity", *HORN, "--n", "4,8,16"],
])
def test_invalid_arguments_exit_3(argv, capsys):
    assert main(argv) == 3
    assert capsys.readouterr().err


def test_inconclusive_exit_2(capsys):
    # exactly log-critical slab is inconclusive for the growth of f+
    assert main(["lyapunov", "--l", "2", "--m", "1", "--profile", "logpower", "--gamma", "1"]) == 2
    assert capsys.readouterr().out.splitlines()[-1] == "inconclusive"


def test_numerical_failure_exit_4(capsys):
    # CG cannot reach a relative residual below rounding level
    code = main(["capacity", "--l", "1", "--m", "2", "--profile", "constant", "--a", "1",
                 "--tol", "1e-30"])
    assert code == 4
    assert "numerical failure" in capsys.readouterr().err


def test_inconsistent_range_is_usage_error(capsys):
    assert main(["lyapunov", *HORN, "--s0", "1", "--smax", "50"]) == 3


def test_classify_evidence(tmp_path, capsys):
    ev = tmp_path / "ev.csv"
    assert main(["classify", *HORN, "--evidence", str(ev)]) == 0
    rows = list(csv.reader(ev.read_text().splitlines()))
    assert rows[0] == ["k", "I_k", "ratio"]
    assert len(rows) > 30


def test_lyapunov_csv(tmp_path, capsys):
    out = tmp_path / "ly.csv"
    assert main(["lyapunov", *HORN, "--out", str(out)]) == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["s", "Gamma", "f", "fprime", "maxDeltaU_violation"]
    assert float(rows[1][2]) == 0.0 and float(rows[1][3]) == 1.0
    assert all(float(r[4]) <= 1e-9 for r in rows[1:])


def test_lyapunov_verify_all(capsys):
    assert main(["lyapunov", *HORN, "--verify", "all"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_simulate_csv_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["simulate", "--l", "1", "--m", "2", "--profile", "constant", "--a", "1",
            "--start-rho", "2", "--inner", "1", "--outer", "5", "--paths", "50", "--seed", "3"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    rows = list(csv.reader(a.read_text().splitlines()))
    assert rows[0] == ["path_id", "exit_cause", "t", "L", "steps"] and len(rows) == 51


def test_experiment_cycle_csv(tmp_path, capsys):
    out = tmp_path / "c.csv"
    assert main(["experiment", "cycle", "--m", "2", "--a", "1", "--paths", "200", "--seed", "7",
                 "--out", str(out)]) == 0
    rows = list(csv.DictReader(out.read_text().splitlines()))
    sig = [r for r in rows if r["quantity"] == "E_sigma_a"]
    assert sig and all(float(r["oracle"]) == 0.375 for r in sig)
    assert all(r["seed"] == "7" for r in rows)


def test_experiment_svg(tmp_path, capsys):
    svg = tmp_path / "p.svg"
    assert main(["experiment", "twosphere", "--l", "1", "--m", "2", "--profile", "constant",
                 "--a", "1", "--rho1", "2", "--R", "3,5", "--paths", "100", "--svg", str(svg)]) == 0
    assert svg.read_text().lstrip().startswith("<?xml")


def test_capacity_cli(tmp_path, capsys):
    out = tmp_path / "cap.csv"
    assert main(["capacity", "--l", "1", "--m", "2", "--profile", "constant", "--a", "1",
                 "--n", "4,8,16,32", "--out", str(out)]) == 0
    rows = list(csv.reader(out.read_text().splitlines()))
    assert rows[0] == ["n", "cells", "ell_n", "iters", "residual", "fit_model"]
    assert capsys.readouterr().out.splitlines()[-1] == "recurrent"


def test_check_assumptions(capsys):
    assert main(["check-assumptions", *HORN]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "pass"


def test_verify_all(capsys):
    assert main(["verify-all", "--l", "3", "--m", "1", "--profile", "constant", "--a", "1"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "lyapunov linkage" in out


def test_config_flags_win_and_dump_round_trips(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# horn\nsubcommand=classify\nl=1\nm=2\nprofile=power\ngamma=0.75\n")
    assert main(["--config", str(cfg)]) == 0
    assert capsys.readouterr().out.strip() == "transient"
    assert main(["classify", "--config", str(cfg), "--gamma", "0.5"]) == 0
    assert capsys.readouterr().out.strip() == "recurrent"
    assert main(["classify", "--config", str(cfg), "--gamma", "0.5", "--dump-config"]) == 0
    dumped = capsys.readouterr().out
    assert "gamma=0.5" in dumped and "subcommand=classify" in dumped
    again = tmp_path / "again.cfg"
    again.write_text(dumped)
    assert main(["--config", str(again), "--dump-config"]) == 0
    assert capsys.readouterr().out == dumped


def test_bad_config(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("subcommand=classify\nwhatever=1\n")
    assert main(["--config", str(cfg)]) == 3
    assert main(["--config", str(tmp_path / "missing.cfg"), "classify"]) == 3


def test_effective_config_skips_unset():
    import argparse
    ns = argparse.Namespace(subcommand="classify", config="x", dump_config=True, gamma=None, l=1)
    assert effective_config(ns) == {"subcommand": "classify", "l": 1}
