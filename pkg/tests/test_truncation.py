import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trunclearn import DomainError, Truncation, check_axioms, constants_of, phi, phi_prime, phi_second

KINDS = ("log", "catoni", "cubic")

# values from a 40-digit mpmath evaluation of the closed forms, derivatives by mpmath.diff
ORACLE = [
    # kind, alpha, m, u, phi, phi', phi''
    ("log", 1.0, 2, 1.0, 0.69314718055994531, 0.5, -0.25),
    ("log", 2.0, 2, 2.0, 1.3862943611198906, 0.5, -0.125),
    ("log", 0.5, 2, 3.0, 0.97295507452765665, 0.14285714285714286, -0.040816326530612245),
    ("catoni", 2.0, 2, 3.0, 2.5757085766132762, 0.6896551724137931, -0.099881093935790725),
    ("catoni", 1.5, 3, 2.5, 2.3613876079693906, 0.84015345268542199, -0.10228543769336935),
    ("catoni", 1.0, 2, 1e-4, 9.9999999833345833e-5, 0.99999999500049997, -9.9985000999999993e-5),
    ("cubic", 2.0, 2, 0.5, 0.3854166666666667, 0.5625, -0.75),
]


@pytest.mark.parametrize("kind,alpha,m,u,f,d1,d2", ORACLE)
def test_high_precision_values(kind, alpha, m, u, f, d1, d2):
    s = Truncation(kind, alpha, m)
    assert phi(s, u) == pytest.approx(f, rel=1e-13)
    assert phi_prime(s, u) == pytest.approx(d1, rel=1e-12)
    assert phi_second(s, u) == pytest.approx(d2, rel=1e-10)


def test_documented_examples():
    assert phi(Truncation("log", 1.0), 0.0) == 0.0
    assert phi(Truncation("cubic", 3.0), 5.0) == 1.0
    assert phi_prime(Truncation("log", 2.0), 2.0) == 0.5
    assert phi_prime(Truncation("cubic", 1.0), 1.0) == 0.0
    assert phi_prime(Truncation("cubic", 1.0), 7.0) == 0.0
    assert phi_second(Truncation("log", 1.0), 0.0) == -1.0
    assert phi_second(Truncation("cubic", 1.0), 0.0) == -2.0
    assert phi_second(Truncation("cubic", 1.0), 2.0) == 0.0


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("alpha", [1e-3, 0.5, 1.0, 37.0, 1e9])
def test_value_and_slope_at_zero(kind, alpha):
    s = Truncation(kind, alpha)
    assert phi(s, 0.0) == 0.0
    assert phi_prime(s, 0.0) == 1.0


def test_cubic_plateau_is_exact():
    s = Truncation("cubic", 3.0)
    u = np.array([3.0, 3.5, 1e6])
    assert np.all(phi(s, u) == 1.0)


def test_constants_table():
    c = constants_of(Truncation("log", 4.0))
    assert (c.M, c.kappa, c.L_alpha) == (0.5, 0.25, 0.25)
    c = constants_of(Truncation("catoni", 4.0))
    assert (c.M, c.kappa, c.L_alpha) == (0.5, 1.0, 0.25)
    c = constants_of(Truncation("cubic", 4.0))
    assert (c.M, c.kappa, c.L_alpha) == (1.0, 0.5, 0.5)


@pytest.mark.parametrize("kind,expected", [("log", 0.25), ("cubic", 0.5), ("catoni", 0.32186999763717679)])
def test_kappa_is_attained_maximum(kind, expected):
    # brute force max of |u phi''(u)| over a fine grid; alpha-free so alpha=1 suffices
    u = np.linspace(0.0, 50.0, 500001)
    got = np.max(np.abs(u * phi_second(Truncation(kind, 1.0), u)))
    assert got == pytest.approx(expected, rel=1e-6)
    assert got <= constants_of(Truncation(kind, 1.0)).kappa + 1e-12


@pytest.mark.parametrize("kind", KINDS)
def test_negative_input_rejected(kind):
    s = Truncation(kind, 1.0)
    for f in (phi, phi_prime, phi_second):
        with pytest.raises(DomainError):
            f(s, -1e-3)
        with pytest.raises(DomainError):
            f(s, np.array([1.0, -2.0]))


def test_invalid_specs():
    with pytest.raises(ValueError):
        Truncation("log", 0.0)
    with pytest.raises(ValueError):
        Truncation("log", -1.0)
    with pytest.raises(ValueError):
        Truncation("tukey", 1.0)
    with pytest.raises(ValueError):
        Truncation("catoni", 1.0, 0)


def test_catoni_m1_is_log():
    u = np.linspace(0, 100, 301)
    a, b = Truncation("catoni", 2.5, 1), Truncation("log", 2.5)
    np.testing.assert_allclose(phi(a, u), phi(b, u), rtol=1e-13, atol=1e-15)
    np.testing.assert_allclose(phi_prime(a, u), phi_prime(b, u), rtol=1e-12)
    np.testing.assert_allclose(phi_second(a, u), phi_second(b, u), rtol=1e-10)


def test_catoni_is_stable_for_huge_input():
    s = Truncation("catoni", 1.0, 2)
    assert phi(s, 1e6) == pytest.approx(26.937875935368603, rel=1e-13)
    assert phi_prime(s, 1e6) == pytest.approx(1.999998e-6, rel=1e-9)
    assert np.isfinite(phi(s, 1e300))


def test_scalar_and_array_shapes():
    s = Truncation("catoni", 1.0)
    assert isinstance(phi(s, 2.0), float)
    assert phi(s, np.ones((2, 3))).shape == (2, 3)
    assert phi_prime(s, np.ones(4)).shape == (4,)


@pytest.mark.parametrize("kind", KINDS)
def test_derivatives_match_finite_differences(kind):
    s = Truncation(kind, 3.0)
    u = np.linspace(0.01, 20.0, 400)
    u = u[np.abs(u - s.alpha) > 1e-4]
    h = 1e-6
    fd = (phi(s, u + h) - phi(s, u - h)) / (2 * h)
    np.testing.assert_allclose(phi_prime(s, u), fd, rtol=1e-5, atol=1e-9)
    fd2 = (phi_prime(s, u + h) - phi_prime(s, u - h)) / (2 * h)
    np.testing.assert_allclose(phi_second(s, u), fd2, rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("kind", KINDS)
def test_untruncated_limit(kind):
    s = Truncation(kind, 1e9)
    u = np.linspace(0.0, 100.0, 1001)
    assert np.all(np.abs(phi(s, u) - u) <= 1e-9 * u**2 + 1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_kappa_on_log_grid(kind):
    x = np.concatenate([[0.0], np.logspace(-6, 3, 2000)])
    for alpha in (0.5, 1.0, 10.0, 100.0):
        s = Truncation(kind, alpha)
        assert np.all(np.abs(x**2 * phi_second(s, x**2)) <= constants_of(s).kappa + 1e-12)


@pytest.mark.parametrize("kind", KINDS)
def test_axioms_pass_on_dense_grid(kind):
    rep = check_axioms(Truncation(kind), np.linspace(0, 100, 2001), [0.5, 1, 10, 100])
    assert rep.passed, rep.failures()
    assert len(rep.results) == 8


@pytest.mark.parametrize("m", [3, 4, 6])
def test_higher_order_catoni_axioms(m):
    rep = check_axioms(Truncation("catoni", 1.0, m), np.linspace(0, 100, 2001), [0.5, 1, 10, 100])
    assert rep.passed, rep.failures()


def test_axioms_single_point_grid():
    for kind in KINDS:
        assert check_axioms(Truncation(kind), [0.0], [1.0]).passed


def test_axiom_report_flags_a_violation():
    # the cubic family violates the log family's M=1/2 bound, so an M too small must be caught
    from trunclearn import truncation as tr

    real = tr.constants_of

    def tight(spec):
        c = real(spec)
        return tr.TruncationConstants(c.M / 4, c.kappa / 4, c.L_alpha)

    tr.constants_of = tight
    try:
        rep = check_axioms(Truncation("cubic"), np.linspace(0, 10, 101), [1.0])
    finally:
        tr.constants_of = real
    names = {r.name for r in rep.failures()}
    assert {"quadratic_gap", "kappa_bound"} <= names
    assert rep["quadratic_gap"].worst > 0
    with pytest.raises(KeyError):
        rep["nonexistent"]


def test_axioms_empty_grid_rejected():
    with pytest.raises(ValueError):
        check_axioms(Truncation(), [], [1.0])


kinds = st.sampled_from(KINDS)
alphas = st.floats(min_value=1e-3, max_value=1e6)
# u/alpha must stay a normal float, or relative precision is lost
us = st.one_of(st.just(0.0), st.floats(min_value=1e-200, max_value=1e8))


@given(kinds, alphas, us)
def test_value_bounds(kind, alpha, u):
    s = Truncation(kind, alpha)
    f = phi(s, u)
    c = constants_of(s)
    assert 0.0 <= f <= u * (1 + 1e-12)
    # u - f cannot be resolved below the rounding of u itself
    assert u - f <= c.M * u * u / alpha * (1 + 1e-12) + 4 * np.finfo(float).eps * u


@given(kinds, alphas, us, us)
def test_slope_monotone_in_u(kind, alpha, u1, u2):
    s = Truncation(kind, alpha)
    lo, hi = min(u1, u2), max(u1, u2)
    assert phi_prime(s, lo) >= phi_prime(s, hi) - 1e-12
    assert 0.0 <= phi_prime(s, hi) <= 1.0


@given(kinds, alphas, alphas, us)
def test_slope_monotone_in_alpha(kind, a1, a2, u):
    lo, hi = min(a1, a2), max(a1, a2)
    assert phi_prime(Truncation(kind, lo), u) <= phi_prime(Truncation(kind, hi), u) + 1e-12


@given(kinds, alphas, us)
def test_curvature_bounds(kind, alpha, u):
    s = Truncation(kind, alpha)
    c = constants_of(s)
    d2 = phi_second(s, u)
    assert abs(d2) <= c.L_alpha * (1 + 1e-12)
    assert abs(u * d2) <= c.kappa + 1e-12
    if kind != "cubic":
        assert d2 <= 0.0
    assert math.isfinite(d2)
