import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from fracfp.frac_core import (
    DiscreteFn,
    FracOrder,
    TimeMesh,
    frac_integral,
    gronwall_bound,
    kernel_integral,
    l1_weights,
    log_mittag_leffler,
    mittag_leffler,
    omega,
    product_weights,
    product_weights_at,
    rho_alpha,
    rl_derivative,
    weighted_norm_L2alpha,
)


def ml_half(z):
    # E_{1/2}(z) = exp(z^2) erfc(-z), independent of the series/integral code
    return float(np.exp(z * z) * special.erfc(-z))


# -- omega --------------------------------------------------------------------


@pytest.mark.parametrize("beta, t, expected", [
    (1.0, 7.3, 1.0),
    (2.0, 3.0, 3.0),
    (0.5, 1.0, 1 / math.sqrt(math.pi)),
])
def test_omega_values(beta, t, expected):
    assert omega(beta, t) == pytest.approx(expected, rel=1e-14)


def test_omega_rejects_bad_input():
    with pytest.raises(ValueError):
        omega(0.0, 1.0)
    with pytest.raises(ValueError):
        omega(0.5, -1.0)


# -- Mittag-Leffler ---------------------------------------------------------


def test_ml_alpha_one_is_exp():
    z = np.linspace(-20, 20, 401)
    assert np.max(np.abs(mittag_leffler(1.0, z) - np.exp(z)) / np.exp(z)) <= 1e-12


@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.9, 1.4])
def test_ml_at_zero(alpha):
    assert mittag_leffler(alpha, 0.0) == 1.0


@pytest.mark.parametrize("z", [-1.0, 1.0, -0.3, 2.5, -4.0, -9.0])
def test_ml_half_matches_erfc_identity(z):
    assert mittag_leffler(0.5, z) == pytest.approx(ml_half(z), rel=1e-8, abs=1e-14)


def test_ml_half_minus_one_value():
    assert mittag_leffler(0.5, -1.0) == pytest.approx(0.42758, abs=5e-6)


@pytest.mark.parametrize("alpha", [0.4, 0.6, 0.75, 0.9])
def test_ml_negative_axis_agrees_with_mpmath(alpha):
    import mpmath as mp

    for x in (0.5, 3.0, 10.0, 40.0):
        ref = float(mp.nsum(lambda k: (-x) ** k / mp.gamma(alpha * k + 1), [0, mp.inf]))
        assert mittag_leffler(alpha, -x) == pytest.approx(ref, rel=1e-9, abs=1e-15)


def test_ml_is_completely_monotone_on_negative_axis():
    x = np.linspace(0, 50, 201)
    vals = mittag_leffler(0.7, -x)
    assert np.all(np.diff(vals) < 0) and np.all(vals > 0)


def test_log_ml_continues_past_overflow():
    small = log_mittag_leffler(0.5, 5.0)
    assert small == pytest.approx(math.log(ml_half(5.0)), rel=1e-10)
    big = log_mittag_leffler(0.2, 50.0)
    assert math.isfinite(big) and big > 700
    # leading asymptotics exp(x^(1/a)) / a
    assert big == pytest.approx(50.0**5 - math.log(0.2), rel=1e-10)


# -- meshes -----------------------------------------------------------------


def test_mesh_nodes_and_validation():
    mesh = TimeMesh(2.0, 4, 2.0)
    np.testing.assert_allclose(mesh.nodes, 2.0 * (np.arange(5) / 4) ** 2)
    for args in [(0.0, 4), (1.0, 0), (1.0, 4, 0.5)]:
        with pytest.raises(ValueError):
            TimeMesh(*args)


def test_frac_order_validation():
    assert FracOrder(0.5).alpha == 0.5
    for a in (0.0, 1.0, -0.2, 1.5):
        with pytest.raises(ValueError):
            FracOrder(a)


# -- fractional integral ---------------------------------------------------


def test_integral_of_one_beta_one_is_t():
    mesh = TimeMesh(1.0, 64, 2.0)
    out = frac_integral(1.0, DiscreteFn(mesh, np.ones(65)))
    np.testing.assert_allclose(out.values, mesh.nodes, atol=1e-14)


@pytest.mark.parametrize("mu, expected", [(0, 2 / math.sqrt(math.pi)),
                                          (1, 4 / (3 * math.sqrt(math.pi)))])
def test_half_integral_power_rule_examples(mu, expected):
    mesh = TimeMesh(1.0, 256, 2.0)
    out = frac_integral(0.5, DiscreteFn(mesh, mesh.nodes**mu))
    assert out.values[-1] == pytest.approx(expected, rel=1e-5)


@pytest.mark.parametrize("beta", [0.25, 0.5, 0.75, 1.5])
@pytest.mark.parametrize("mu", [0, 1, 2, 3])
def test_power_rule_oracle_with_monotone_error(beta, mu):
    T = 1.7
    exact = special.gamma(mu + 1) / special.gamma(mu + beta + 1) * T ** (mu + beta)
    errs = []
    for N in (256, 512, 1024):
        mesh = TimeMesh(T, N, 2.0)
        val = frac_integral(beta, DiscreteFn(mesh, mesh.nodes**mu)).values[-1]
        errs.append(abs(val - exact) / exact)
    assert errs[-1] <= 1e-3
    if mu >= 2:  # mu = 0, 1 are represented exactly; errors sit at rounding level
        assert errs[0] > errs[1] > errs[2]
    else:
        assert max(errs) <= 1e-12


@pytest.mark.parametrize("b1, b2", [(0.3, 0.4), (0.5, 0.5), (0.25, 0.9)])
def test_semigroup(b1, b2):
    mesh = TimeMesh(1.0, 1024, 2.0)
    f = DiscreteFn(mesh, np.cos(3 * mesh.nodes) + mesh.nodes**2)
    lhs = frac_integral(b1, frac_integral(b2, f)).values
    rhs = frac_integral(b1 + b2, f).values
    assert np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)) <= 1e-3


@settings(max_examples=30, deadline=None)
@given(beta=st.floats(0.05, 2.0), N=st.integers(2, 60), r=st.floats(1.0, 3.0))
def test_weights_nonnegative_and_rows_integrate_one(beta, N, r):
    mesh = TimeMesh(1.3, N, r)
    W = product_weights(mesh, beta)
    assert np.all(W >= -1e-15)
    np.testing.assert_allclose(W.sum(axis=1), omega(beta + 1, mesh.nodes), rtol=1e-11,
                               atol=1e-15)


@settings(max_examples=30, deadline=None)
@given(beta=st.floats(0.1, 1.0), a=st.floats(-3, 3), b=st.floats(-3, 3),
       seed=st.integers(0, 2**31 - 1))
def test_frac_integral_is_linear(beta, a, b, seed):
    rng = np.random.default_rng(seed)
    mesh = TimeMesh(1.0, 32, 1.5)
    f, g = rng.normal(size=(2, 33))
    lhs = frac_integral(beta, DiscreteFn(mesh, a * f + b * g)).values
    rhs = (a * frac_integral(beta, DiscreteFn(mesh, f)).values
           + b * frac_integral(beta, DiscreteFn(mesh, g)).values)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + abs(a) + abs(b)))


def test_weights_at_intermediate_times_match_nodes():
    mesh = TimeMesh(1.0, 40, 2.0)
    W = product_weights(mesh, 0.6)
    np.testing.assert_allclose(product_weights_at(mesh, 0.6, mesh.nodes[1:]), W[1:],
                               atol=1e-14)
    tau = np.array([0.013, 0.4, 0.77])
    got = product_weights_at(mesh, 0.6, tau) @ mesh.nodes
    np.testing.assert_allclose(got, omega(2.6, tau), rtol=1e-12)


def test_kernel_integral_is_exact_for_linear_data():
    mesh = TimeMesh(2.0, 30, 2.0)
    q = kernel_integral(mesh, 0.4)
    # int_0^T omega_0.4(t) (1 + t) dt = omega_1.4(T) + T^1.4 / (1.4 Gamma(0.4))
    exact = omega(1.4, 2.0) + special.gamma(2) / special.gamma(2.4) * 2.0**1.4 * 0.4
    assert q @ (1 + mesh.nodes) == pytest.approx(exact, rel=1e-12)


# -- Riemann-Liouville derivative -------------------------------------------


def test_rl_derivative_of_one_is_omega_alpha():
    mesh = TimeMesh(1.0, 128, 2.0)
    out = rl_derivative(0.4, DiscreteFn(mesh, np.ones(129)))
    np.testing.assert_allclose(out.values[1:], omega(0.4, mesh.nodes[1:]), rtol=1e-13)
    assert out.values[0] == np.inf


def test_rl_derivative_power_rule_and_zero():
    mesh = TimeMesh(1.0, 512, 2.0)
    out = rl_derivative(0.5, DiscreteFn(mesh, mesh.nodes.copy()))
    assert out.values[-1] == pytest.approx(2 / math.sqrt(math.pi), rel=1e-10)
    zero = rl_derivative(0.5, DiscreteFn(mesh, np.zeros(513)))
    assert not np.any(zero.values)


def test_l1_weights_differentiate_the_integral():
    # D @ f approximates J^alpha(f'); for f = t^2 that is 2 omega_{alpha+2}
    errs = []
    for N in (256, 512, 1024):
        mesh = TimeMesh(1.0, N, 2.0)
        got = l1_weights(mesh, 0.3) @ mesh.nodes**2
        errs.append(abs(got[-1] / (2 * omega(2.3, 1.0)) - 1))
    assert errs[-1] <= 1e-3
    assert errs[0] > errs[1] > errs[2]


# -- Gronwall, rho, weighted norm --------------------------------------------


@pytest.mark.parametrize("args, expected", [
    ((0.7, 1.0, 0.0, 5.0), 1.0),
    ((1.0, 1.0, 1.0, 1.0), math.e),
    ((0.5, 2.0, 1.0, 1.0), 2 * ml_half(1.0)),
])
def test_gronwall_bound(args, expected):
    assert gronwall_bound(*args) == pytest.approx(expected, rel=1e-10)


def test_gronwall_bound_value_and_errors():
    assert gronwall_bound(0.5, 2.0, 1.0, 1.0) == pytest.approx(10.0180, abs=1e-4)
    with pytest.raises(ValueError):
        gronwall_bound(0.5, -1.0, 1.0, 1.0)


def test_rho_at_half_matches_closed_form():
    assert rho_alpha(0.5) == pytest.approx(math.sqrt(2 * math.pi / 27), rel=1e-14)
    assert rho_alpha(0.5) == pytest.approx(0.48240, abs=5e-6)


def test_rho_increases_towards_one():
    grid = np.linspace(0.55, 0.95, 9)
    vals = [rho_alpha(a) for a in grid]
    assert np.all(np.diff(vals) > 0)
    assert rho_alpha(0.9999) == pytest.approx(1.0, abs=1e-3)


def test_weighted_norm_examples():
    mesh = TimeMesh(1.0, 64, 1.0)
    assert weighted_norm_L2alpha(1.0, DiscreteFn(mesh, np.ones(65))) == pytest.approx(1.0)
    mesh = TimeMesh(2.5, 64, 2.0)
    got = weighted_norm_L2alpha(0.6, DiscreteFn(mesh, np.ones(65)))
    assert got == pytest.approx(math.sqrt(2.5**0.6 / special.gamma(1.6)), rel=1e-12)
    assert weighted_norm_L2alpha(0.6, DiscreteFn(mesh, np.zeros(65))) == 0.0
    with pytest.raises(ValueError):
        weighted_norm_L2alpha(0.6, DiscreteFn(mesh, -np.ones(65)))
