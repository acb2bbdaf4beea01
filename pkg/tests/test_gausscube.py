import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate as spi
from scipy.special import erf

from mdfem.gausscube import (
    GaussCubature,
    anchored_norm_1d,
    bound_constants,
    c_diamond,
    constant_C1,
    constant_M,
    constant_M_bound,
    error_bound,
    integrate,
    kernel_eval,
    make_cubature,
    truncation_T,
)
from mdfem.gf2lattice import cbc_construct

SQRT2PI = math.sqrt(2 * math.pi)


def kernel_oracle(alpha, x, y):
    """Adaptive-quadrature version of the kernel."""
    val = sum((x * y) ** t / math.factorial(t) ** 2 for t in range(1, alpha))
    if x * y > 0:
        ax, ay = abs(x), abs(y)
        f = lambda t: (ax - t) ** (alpha - 1) * (ay - t) ** (alpha - 1) * SQRT2PI * math.exp(t * t / 2)
        v, _ = spi.quad(f, 0, min(ax, ay), epsabs=0, epsrel=1e-13)
        val += v / math.factorial(alpha - 1) ** 2
    return val


# ---------------------------------------------------------------- kernel


@given(st.integers(1, 5), st.floats(-6, 6))
def test_kernel_anchored(alpha, y):
    assert kernel_eval(alpha, 0.0, y) == 0.0
    assert kernel_eval(alpha, y, 0.0) == 0.0


def test_kernel_opposite_signs_alpha1():
    assert kernel_eval(1, 1.0, -1.0) == 0.0


def test_kernel_11_alpha2():
    v, _ = spi.quad(lambda t: (1 - t) ** 2 * SQRT2PI * math.exp(t * t / 2), 0, 1, epsrel=1e-13)
    assert kernel_eval(2, 1.0, 1.0) == pytest.approx(1.0 + v, rel=1e-10)


@pytest.mark.parametrize("alpha", [1, 2, 3, 4])
@pytest.mark.parametrize("x, y", [(0.3, 2.0), (-1.5, -4.0), (5.0, 5.0), (-2.0, 3.0), (7.5, 0.1)])
def test_kernel_matches_adaptive_quadrature(alpha, x, y):
    assert kernel_eval(alpha, x, y) == pytest.approx(kernel_oracle(alpha, x, y), rel=1e-10, abs=1e-14)


@given(st.integers(1, 4), st.floats(-8, 8), st.floats(-8, 8))
def test_kernel_symmetric(alpha, x, y):
    assert kernel_eval(alpha, x, y) == pytest.approx(kernel_eval(alpha, y, x), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("alpha", [1, 2, 3])
@pytest.mark.parametrize("seed", [0, 1])
def test_kernel_gram_psd(alpha, seed):
    pts = np.random.default_rng(seed).normal(scale=2.0, size=8)
    G = np.array([[kernel_eval(alpha, a, b) for b in pts] for a in pts])
    assert np.linalg.eigvalsh(G).min() >= -1e-8 * max(1.0, np.abs(G).max())


def test_kernel_rejects_bad_input():
    with pytest.raises(ValueError):
        kernel_eval(0, 1.0, 1.0)
    with pytest.raises(ValueError):
        kernel_eval(2, math.inf, 1.0)


# ---------------------------------------------------------------- constants


@pytest.mark.parametrize("alpha", range(1, 7))
def test_M_positive_below_2767_and_bound(alpha):
    M = constant_M(alpha)
    assert 0 < M < 2.767
    assert M <= constant_M_bound(alpha)


@pytest.mark.parametrize("alpha", [1, 2, 3])
def test_M_matches_kernel_quadrature(alpha):
    f = lambda y: math.sqrt(kernel_eval(alpha, y, y)) * math.exp(-y * y / 2) / SQRT2PI
    v, _ = spi.quad(f, 0, 25, limit=400, epsrel=1e-11)  # integrand < 1e-60 beyond
    assert constant_M(alpha) == pytest.approx(2 * v, rel=1e-8)


def test_M_bound_peaks_at_three():
    vals = {a: constant_M_bound(a) for a in range(1, 7)}
    assert max(vals, key=vals.get) == 3
    assert vals[3] < 2.767


def test_ctilde_in_bound_constants():
    assert bound_constants(2, 1.0, 1).Ctilde == pytest.approx(10.0)


@pytest.mark.parametrize("alpha, lam, s", [(2, 1.0, 1), (2, 1.5, 3), (3, 2.2, 2), (4, 1.0, 4)])
def test_bound_constant_relations(alpha, lam, s):
    bc = bound_constants(alpha, lam, s)
    assert bc.C3 <= 5 * s * bc.M ** (s - 1) * math.sqrt(alpha)
    assert bc.C_full >= bc.C4 * (2 / math.sqrt(math.log(2)) + 2 * math.sqrt(lam)) ** ((alpha + 0.5) * s)
    assert bc.C_full >= bc.C3 / (2 * math.sqrt(lam * math.log(2)))


def test_C1_reports_both_bessel_arguments():
    # only the I0 factor differs, under a square root
    from scipy.special import i0

    ratio = constant_C1(3, 0.5) / constant_C1(3, 0.25)
    assert ratio == pytest.approx(math.sqrt(i0(0.5) / i0(0.25)), rel=1e-14)
    assert i0(0.5) == pytest.approx(1.06348, abs=1e-5)


@pytest.mark.parametrize("alpha", [1, 2, 3])
def test_c_diamond_value_below_bound(alpha):
    value, bound = c_diamond(alpha)
    assert 0 < value <= bound


def test_bound_constants_lambda_range():
    with pytest.raises(ValueError):
        bound_constants(2, 2.0, 1)


# ---------------------------------------------------------------- truncation


def test_T_examples():
    assert truncation_T(math.e, 1.0) == pytest.approx(4.0)
    assert truncation_T(2, 1.0) == pytest.approx(3.6651, abs=1e-4)


@given(st.floats(2, 1e6), st.floats(2, 1e6), st.floats(0.5, 4))
def test_T_monotone(n1, n2, lam):
    lo, hi = sorted((n1, n2))
    assert truncation_T(lo, lam) <= truncation_T(hi, lam)
    assert truncation_T(lo, lam) <= truncation_T(lo, lam + 0.5)


def test_T_errors():
    with pytest.raises(ValueError):
        truncation_T(1, 1.0)
    with pytest.raises(ValueError):
        truncation_T(4, 0.4)


# ---------------------------------------------------------------- cubature


def test_integrate_zero():
    c = make_cubature(5, 2, 2, 1.0)
    assert integrate(c, lambda z: np.zeros(len(z))) == 0.0


@pytest.mark.parametrize("s, m, tol", [(1, 12, 1e-6), (2, 14, 1e-4)])
def test_integrate_one_against_gauss_legendre(s, m, tol):
    c = make_cubature(m, s, 2, 1.0)
    x, w = np.polynomial.legendre.leggauss(200)
    mass_1d = float(np.sum(w * c.T * np.exp(-0.5 * (c.T * x) ** 2) / SQRT2PI))
    assert mass_1d == pytest.approx(erf(c.T / math.sqrt(2)), rel=1e-12)
    assert integrate(c, lambda z: np.ones(len(z))) == pytest.approx(mass_1d**s, rel=tol)


def test_weights_positive_and_nodes_in_box():
    c = make_cubature(8, 3, 3, 2.0)
    z = c.nodes()
    assert np.all(np.abs(z) <= c.T)
    assert np.all(c.weights() > 0)


def test_non_finite_integrand_rejected():
    c = make_cubature(4, 1, 2, 1.0)
    with pytest.raises(ArithmeticError):
        integrate(c, lambda z: np.full(len(z), np.nan))


def test_cubature_rejects_bad_parameters():
    rule = cbc_construct(3, 1, 2)
    with pytest.raises(ValueError):
        GaussCubature(rule, 2.0, 4.0)
    with pytest.raises(ValueError):
        GaussCubature(rule, 1.0, 0.1)


def test_deterministic_sum():
    c = make_cubature(10, 2, 2, 1.0)
    f = lambda z: np.prod(np.expm1(0.5 * z), axis=1)
    assert integrate(c, f) == integrate(c, f)


def test_rate_s1_alpha2():
    exact = math.expm1(1 / 8)
    ns, errs = [], []
    for m in range(6, 15):
        c = make_cubature(m, 1, 2, 1.0)
        errs.append(abs(integrate(c, lambda z: np.expm1(0.5 * z[:, 0])) - exact))
        ns.append(c.n)
    slope = -np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert slope >= 1.5


# ---------------------------------------------------------------- error bound


def test_error_bound_zero_norm():
    assert error_bound(make_cubature(4, 1, 2, 1.0), 0.0) == 0.0


def test_error_bound_eventually_decreasing():
    b = [error_bound(make_cubature(m, 1, 2, 1.5), 1.0) for m in range(8, 16)]
    assert all(x > y for x, y in zip(b, b[1:]))


def test_error_bound_dominates_measured_error():
    # F(y) = exp(y/2) - 1 has F'(0) = 1/2 and F'' = exp(y/2)/4, and E[exp(y)] = exp(1/2)
    norm = anchored_norm_1d([0.5], lambda y: 0.25 * math.exp(y / 2), 2)
    assert norm == pytest.approx(math.sqrt(0.25 + math.exp(0.5) / 16), rel=1e-10)
    exact = math.expm1(1 / 8)
    for m in range(2, 13):
        c = make_cubature(m, 1, 2, 1.0)
        err = abs(integrate(c, lambda z: np.expm1(0.5 * z[:, 0])) - exact)
        assert err <= error_bound(c, norm)
