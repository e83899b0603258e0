import csv
import math

import numpy as np
import pytest

from fracfp.cli import ConfigError, build_problem, load_config, main
from fracfp.frac_core import mittag_leffler
from fracfp.solver import read_trajectory_csv


def write_config(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


ORACLE = """
[problem]
alpha = 0.75
m = 4          # small Galerkin space
u0 = mode1
[mesh]
N = 2048
"""


def run_cli(tmp_path, command, text, out="out", *extra):
    cfg = write_config(tmp_path, text)
    outdir = tmp_path / out
    code = main([command, "--config", cfg, "--out", str(outdir), "--quiet", *extra])
    return code, outdir


# -- config ----------------------------------------------------------------------


def test_defaults_and_literals(tmp_path):
    cfg = load_config(None)
    assert cfg.problem["alpha"] == 0.75 and cfg.mesh["N"] == 2048
    path = write_config(tmp_path, "[problem]\nL = pi\nu0 = [1, 0, 0]\nm = 3\n"
                                  "[run]\nscheme = both\nrate_window = (0.01, 0.2)\n")
    cfg = load_config(path)
    assert cfg.problem["L"] == math.pi and cfg.schemes == ("vie", "direct")
    assert cfg.run["rate_window"] == (0.01, 0.2)
    np.testing.assert_array_equal(build_problem(cfg).u0, [1.0, 0.0, 0.0])
    assert cfg.grading == pytest.approx(2 / 0.75)


@pytest.mark.parametrize("text, key", [
    ("[problem]\nalpha = 1.0\n", "problem.alpha"),
    ("[problem]\nalpha = zero\n", "problem.alpha"),
    ("[problem]\nbogus = 1\n", "problem.bogus"),
    ("[extra]\nx = 1\n", "extra"),
    ("[problem]\nm = 3\nu0 = [1, 2]\n", "problem.u0"),
    ("[problem]\nforcing = wind\n", "problem.forcing"),
    ("[problem]\nforcing = polynomial\n", "problem.forcing_coeffs"),
    ("[mesh]\nN = 2\n", "mesh.N"),
    ("[run]\nscheme = euler\n", "run.scheme"),
    ("[run]\nN_list = [256, 128, 512]\n", "run.N_list"),
    ("[run]\nmanufactured = [(0.5, 1)]\n", "run.manufactured"),
])
def test_config_errors_name_the_key(tmp_path, text, key):
    with pytest.raises(ConfigError) as info:
        load_config(write_config(tmp_path, text))
    assert info.value.key == key


def test_config_error_exit_code(tmp_path, capsys):
    code, out = run_cli(tmp_path, "solve", "[problem]\nalpha = 1.5\n")
    assert code == 2
    assert "problem.alpha" in capsys.readouterr().err
    assert main(["solve", "--config", str(tmp_path / "missing.ini"), "--quiet"]) == 2


# -- subcommands -------------------------------------------------------------------


def test_solve_oracle_matches_mittag_leffler(tmp_path):
    code, out = run_cli(tmp_path, "solve", ORACLE)
    assert code == 0
    t, coeffs = read_trajectory_csv(out / "trajectory_vie.csv")
    ref = mittag_leffler(0.75, -t**0.75)
    assert np.max(np.abs(coeffs[:, 0] - ref) / ref) <= 1e-3
    report = (out / "report.txt").read_text()
    assert "oracle" in report and report.rstrip().endswith("all checks passed")


def test_reruns_are_byte_identical(tmp_path):
    text = ORACLE.replace("2048", "64") + "[run]\nscheme = both\n"
    run_cli(tmp_path, "solve", text, "a")
    run_cli(tmp_path, "solve", text, "b")
    for s in ("vie", "direct"):
        name = f"trajectory_{s}.csv"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_constants_refuse_classical_family_at_half(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "constants",
                      "[problem]\nalpha = 0.5\n[run]\nfamily = classical\n")
    assert code == 2
    err = capsys.readouterr().err
    assert "run.family" in err and "1/2" in err


def test_constants_csv(tmp_path):
    code, out = run_cli(tmp_path, "constants", "[problem]\nm = 4\nforcing = spacetime\n")
    assert code == 0
    rows = {r["name"]: r for r in csv.DictReader((out / "constants.csv").open())}
    assert float(rows["C2"]["value"]) > 2
    assert rows["C1"]["value"] == "inf" and float(rows["C1"]["log10"]) > 300
    assert "synthesized" in rows["C8"]["provenance"]


def test_verify_estimates_on_zero_problem(tmp_path):
    code, out = run_cli(tmp_path, "verify-estimates",
                        "[problem]\nu0 = zero\nm = 4\n[mesh]\nN = 64\n")
    assert code == 0
    rows = list(csv.DictReader((out / "estimates_vie.csv").open()))
    assert len(rows) == 16 and all(r["pass"] == "true" for r in rows)


def test_scan_alpha(tmp_path):
    code, out = run_cli(tmp_path, "scan-alpha", "[problem]\nm = 4\n")
    assert code == 0
    rows = list(csv.DictReader((out / "scan.csv").open()))
    C7 = [float(r["C7"]) for r in rows]
    assert len(rows) == 11 and C7[0] > C7[1] > C7[2] > C7[3] and math.isfinite(C7[-1])


def test_rates(tmp_path):
    code, out = run_cli(tmp_path, "rates", ORACLE)
    assert code == 0
    rows = list(csv.DictReader((out / "rates_vie.csv").open()))
    assert rows[0]["quantity"] == "u^(1)"
    assert float(rows[0]["exponent"]) == pytest.approx(-0.25, abs=0.1)


def test_rates_below_half_is_a_config_error(tmp_path):
    code, _ = run_cli(tmp_path, "rates", "[problem]\nalpha = 0.4\n")
    assert code == 2


def test_failed_check_sets_exit_one_and_writes_report(tmp_path):
    # ||u|| of a decaying mode has a negative slope, so a tiny tolerance fails q = 0
    text = ORACLE + "[run]\nrate_q = 0\nrate_tol = 0.001\n"
    code, out = run_cli(tmp_path, "rates", text)
    assert code == 1
    report = (out / "report.txt").read_text()
    assert "FAIL u^(0)" in report and report.rstrip().endswith("SOME CHECKS FAILED")
    assert (out / "rates_vie.csv").exists()


def test_convergence(tmp_path):
    text = "[problem]\nm = 4\nu0 = zero\n[run]\nN_list = [64, 128, 256]\n"
    code, out = run_cli(tmp_path, "convergence", text)
    assert code == 0
    lines = (out / "convergence_vie_s2_k2.csv").read_text().splitlines()
    assert lines[0] == "N,error,order" and len(lines) == 4
    assert float(lines[2].split(",")[2]) == pytest.approx(2.0, abs=0.2)
    assert (out / "convergence_vie_s1_k1.csv").exists()
