import csv
import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import gamma

from fracfp.estimates import (
    AssumptionError,
    EstimateReport,
    EstimateRow,
    check_classical_estimates,
    check_mild_estimates,
    compute_constants,
    scan_constants,
)
from fracfp.experiments import SCAN_GRID
from fracfp.frac_core import TimeMesh
from fracfp.problems import corpus_problem, oracle_problem
from fracfp.solver import ProblemSpec, solve
from fracfp.spectral import build_basis


def ml_reference(a, z):
    """Power series summed in 60-digit arithmetic until the terms die out."""
    with mp.workdps(60):
        z, total, k = mp.mpf(z), mp.mpf(0), 0
        while True:
            term = z**k / mp.gamma(a * k + 1)
            total += term
            if k > 10 and abs(term) < mp.mpf(10) ** -40 * abs(total):
                return float(total)
            k += 1


def printed_constants(a, kappa, T, C_P, C_R, rho, Fs, Fw, Fts, Ftw, C8=None, C9=None,
                      with_C1=True):
    """The constants as printed, evaluated without the package."""
    c = math.cos(a * math.pi / 2)
    C2 = 2 * (1 + Fs**2 / kappa) + T**2 * Fts**2 / kappa
    out = dict(C2=C2)
    if with_C1:
        w = T ** (a / 2) / gamma(1 + a / 2)
        C1 = (1 + C_P) / 2 * (1 + C2 * w**2 / c * ml_reference(a / 2, C2 * w / c * T**a))
        # C1 may overflow; a zero forcing factor still removes its term
        Fterm = 2 * Fw**2 + T**2 * Ftw**2
        C4 = 2 / kappa + (2 * C1 / kappa**2 * Fterm if Fterm else 0.0)
        out.update(
            C1=C1,
            C3=2 + (C1 / kappa * 2 * Fterm if Fterm else 0.0),
            C4=C4,
            C5=C4 * T ** (1 - a) * (1 + C_P) / ((1 - a) * c * gamma(1 - a / 2) ** 2),
        )
    if a > 0.5:
        out["C6"] = C_R**2 * (kappa + Fw) ** 2
        out["C7"] = gamma(2 * a - 1) / gamma(a) ** 2 * (
            1 + T ** (2 * a - 1) / ((2 * a - 1) * gamma(a) ** 2)
            + Fs**2 * gamma(a) * T ** (1 - a) / (kappa * gamma(2 * a - 1)))
        out["C11"] = 6 * C_R**2 * (kappa**2 + Fw**2) / ((2 * a - 1) * gamma(a) ** 2) \
            * T ** (2 * a - 1)
        if C8 is not None:
            # a vanishing norm of F removes the term even when C8, C9 overflow
            out["C10"] = 3.0 if Fw == 0 else \
                3 * (1 + Fw**2 * (C8 * T + C9 * gamma(a) * T ** (1 - a)))
            out["C12"] = C8 * T ** (2 - a) / gamma(2 - a) + (out["C10"] + out["C11"]) * (
                1 + C_R**2 + T ** (1 - a) / (kappa * rho) + 1 / kappa**2)
    return out


def unforced(alpha, kappa=1.0, L=math.pi, T=1.0):
    return ProblemSpec(alpha, kappa, build_basis(L, 8), T, u0=np.eye(8)[0])


# -- constants ---------------------------------------------------------------


def test_unforced_constant_examples():
    c = compute_constants(unforced(0.75))
    assert c.C2 == pytest.approx(2.0)
    assert c.C6 == pytest.approx(3.0)
    g = gamma(0.75) ** 2
    assert c.C7 == pytest.approx(gamma(0.5) / g * (1 + 1 / (0.5 * g)), rel=1e-13)
    assert c.C7 == pytest.approx(2.752, abs=5e-4)


@pytest.mark.parametrize("alpha, kappa, L, T", [
    (0.75, 1.0, math.pi, 1.0),
    (0.9, 1.0, math.pi, 1.0),
    (0.6, 2.0, 1.0, 0.5),
    (0.3, 0.7, 2.0, 1.5),
])
def test_unforced_constants_match_printed_formulas(alpha, kappa, L, T):
    c = compute_constants(unforced(alpha, kappa, L, T))
    ref = printed_constants(alpha, kappa, T, c.C_P, c.C_R, c.rho, 0, 0, 0, 0, c.C8, c.C9)
    for k, v in ref.items():
        assert getattr(c, k) == pytest.approx(v, rel=1e-9), k


def test_forced_constants_match_printed_formulas():
    p = corpus_problem(0.9, "spacetime")
    c = compute_constants(p)
    n = p.F.norms(p.T, p.basis.L)
    ref = printed_constants(0.9, 1.0, 1.0, c.C_P, c.C_R, c.rho, n["sup"], n["w1"],
                            n["sup_t"], n["w1_t"], with_C1=False)
    for k in ("C2", "C6", "C7", "C11"):
        assert getattr(c, k) == pytest.approx(ref[k], rel=1e-12), k
    # C1 leaves double range here: kept as inf with its base-10 log
    assert c.C1 == math.inf and c.log10["C1"] > 300
    assert c.C3 == math.inf and c.C4 == math.inf


def test_C1_is_increasing_in_time():
    c = compute_constants(unforced(0.8))
    vals = c.C1_at(np.linspace(0, 1, 11))
    assert vals[0] == pytest.approx((1 + c.C_P) / 2)
    assert np.all(np.diff(vals) > 0)
    assert c.C1_at(1.0) == pytest.approx(c.C1)


def test_classical_family_needs_alpha_above_half():
    with pytest.raises(AssumptionError, match="1/2"):
        compute_constants(unforced(0.5), family="classical")
    c = compute_constants(unforced(0.4))
    assert c.C6 is None and not c.classical
    assert compute_constants(unforced(0.4), family="mild").C5 > 0


def test_constants_are_positive_and_deterministic():
    for a in (0.6, 0.75, 0.9):
        for fam in ("zero", "constant", "spacetime"):
            p = corpus_problem(a, fam)
            c1, c2 = compute_constants(p), compute_constants(p)
            for k, v in c1.as_dict().items():
                assert v > 0, k
                assert v == getattr(c2, k)


def test_synthesized_constants_are_labelled():
    c = compute_constants(unforced(0.75))
    for k in ("C8", "C9", "C13"):
        assert "synthesized" in c.provenance[k]


# -- reports -------------------------------------------------------------------


def run_all_rows(problem, N=512, scheme="vie", slack=0.05):
    mesh = TimeMesh(problem.T, N, 2 / problem.a)
    traj = solve(problem, mesh, scheme)
    c = compute_constants(problem)
    rep = check_mild_estimates(traj, c, problem, slack)
    if c.classical:
        rep.extend(check_classical_estimates(traj, c, problem, slack))
    return rep


def test_zero_problem_rows_are_trivial():
    rep = run_all_rows(ProblemSpec(0.75, 1.0, build_basis(math.pi, 8), 1.0), N=64)
    assert rep.passed and len(rep.rows) == 16
    for row in rep.rows:
        assert row.lhs == 0.0 and row.rhs == 0.0


@pytest.mark.parametrize("scheme", ["vie", "direct"])
def test_oracle_rows_pass(scheme):
    rep = run_all_rows(oracle_problem(0.75), N=1024, scheme=scheme)
    assert rep.passed, [(r.inequality_id, r.lhs, r.rhs) for r in rep.failures()]
    for row in rep.rows:
        assert row.rhs > 0


def test_u0_projection_row_is_exact():
    rep = run_all_rows(corpus_problem(0.75, "constant"), N=64)
    row = rep["u0_projection_h2"]
    assert row.lhs <= row.rhs and row.passed


def test_mild_rows_only_below_half():
    rep = run_all_rows(corpus_problem(0.4, "spacetime", m=8), N=128)
    ids = {r.inequality_id for r in rep.rows}
    assert "mild_energy" in ids and "classical_bound" not in ids
    assert rep.passed


def test_report_csv(tmp_path):
    rep = run_all_rows(oracle_problem(0.9), N=128)
    path = tmp_path / "rep.csv"
    rep.to_csv(path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["inequality_id", "alpha", "lhs", "rhs", "slack", "pass"]
    assert len(rows) == len(rep.rows) + 1
    assert {r[5] for r in rows[1:]} == {"true"}
    with pytest.raises(KeyError):
        rep["nope"]


@given(lhs=st.floats(0, 1e6), rhs=st.floats(0, 1e6), slack=st.floats(0, 1))
def test_row_pass_rule(lhs, rhs, slack):
    row = EstimateRow("x", 0.7, lhs, rhs, slack)
    assert row.passed == (lhs <= rhs * (1 + slack))


def test_failures_are_listed():
    rep = EstimateReport([EstimateRow("a", 0.7, 2.0, 1.0, 0.05),
                          EstimateRow("b", 0.7, 1.0, 1.0, 0.05)])
    assert not rep.passed and [r.inequality_id for r in rep.failures()] == ["a"]


# -- scan ----------------------------------------------------------------------


def test_scan_pattern():
    table = scan_constants(SCAN_GRID, oracle_problem(0.75))
    assert all(table.flags.values()), table.flags
    C7 = table.columns["C7"]
    assert np.all(np.diff(C7[:4]) < 0) and np.isfinite(C7[-1])
    assert np.all(np.diff(table.columns["rho"]) > 0)
    assert np.ptp(table.columns["C2"]) == 0


def test_scan_grows_without_bound_towards_half():
    near = scan_constants([0.5001, 0.501, 0.51, 0.6], oracle_problem(0.75))
    assert near.columns["C7"][0] > 1e3 and near.columns["C11"][0] > 1e3


def test_scan_rejects_grid_outside_range(tmp_path):
    with pytest.raises(AssumptionError):
        scan_constants([0.5, 0.7], oracle_problem(0.75))
    table = scan_constants([0.6, 0.7], oracle_problem(0.75))
    table.to_csv(tmp_path / "scan.csv")
    header = (tmp_path / "scan.csv").read_text().splitlines()[0]
    assert header == "alpha,rho,C2,C7,C8,C9,C11,C12"
