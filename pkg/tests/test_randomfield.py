import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import zeta

from mdfem.randomfield import (
    EXP_LIMIT,
    FiniteField,
    HaarField,
    SineField,
    TailBoundUnavailable,
    WeightFamily,
    check_summability,
    C_kappa_alpha,
    C_prime_kappa_alpha,
    delta_kappa_alpha,
    eval_a,
    is_admissible,
    kappa,
    log_a,
    make_field,
)

TEST_FIELD = make_field("sine", 0.25, 3.0, "power", 3.0, 64)
x_grid = np.linspace(0.01, 0.99, 17)


def test_empty_index_set_gives_one():
    assert np.all(eval_a(TEST_FIELD, x_grid, np.zeros((3, 0)), ()) == 1.0)


def test_zero_coordinate_contributes_nothing():
    a = eval_a(TEST_FIELD, x_grid, [[0.7, 0.0, -1.2]], (1, 2, 3))
    b = eval_a(TEST_FIELD, x_grid, [[0.7, -1.2]], (1, 3))
    np.testing.assert_allclose(a, b, rtol=1e-15)


def test_constant_phi():
    spec = FiniteField((lambda x: 0.1 + 0 * x,), (1.0,))
    np.testing.assert_allclose(eval_a(spec, [0.3, 0.8], [[2.0]], (1,)), math.exp(0.2), rtol=1e-15)


@given(
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
    st.lists(st.floats(-5, 5), min_size=3, max_size=3),
)
def test_log_a_linear_and_a_positive(y, z):
    v = (1, 4, 9)
    s = log_a(TEST_FIELD, x_grid, np.add(y, z), v)
    np.testing.assert_allclose(s, log_a(TEST_FIELD, x_grid, y, v) + log_a(TEST_FIELD, x_grid, z, v), atol=1e-12)
    assert np.all(eval_a(TEST_FIELD, x_grid, y, v) > 0)


def test_sine_phi_closed_form():
    phi = TEST_FIELD.phi(np.array([1, 2, 5]), np.array([0.5]))
    np.testing.assert_allclose(phi[:, 0], [0.25, 0.0, 0.25 / 125], atol=1e-16)


def test_overflow_guard():
    spec = FiniteField((lambda x: 1.0 + 0 * x,), (1.0,))
    with pytest.raises(ArithmeticError):
        eval_a(spec, [0.5], [[EXP_LIMIT + 1]], (1,))


def test_mismatched_y_rejected():
    with pytest.raises(ValueError):
        log_a(TEST_FIELD, x_grid, [[1.0, 2.0]], (1,))


# ---------------------------------------------------------------- kappa


def test_kappa_constant_phi():
    spec = FiniteField((lambda x: 0.1 + 0 * x,), (1.0,))
    assert kappa(spec).value == pytest.approx(0.1)


def test_kappa_sine_bounded_by_c_zeta3():
    # sigma - b_exponent = 3: sum_j |phi_j|/b_j = c sum_j j^-3 |sin(j pi x)| <= c zeta(3)
    spec = make_field("sine", 0.25, 6.0, "power", 3.0, 256)
    rep = kappa(spec)
    assert rep.tail == pytest.approx(0.25 * (zeta(3.0) - np.sum(np.arange(1, 257.0) ** -3)), rel=1e-10)
    assert rep.value <= 0.25 * zeta(3.0) + 1e-12
    assert 0.25 * zeta(3.0) == pytest.approx(0.3005, abs=1e-4)
    assert is_admissible(spec, 2)
    assert not is_admissible(spec, 3)


def test_kappa_of_equal_decay_pairing_is_unavailable():
    with pytest.raises(TailBoundUnavailable):
        kappa(TEST_FIELD)
    assert not is_admissible(TEST_FIELD, 2)


def test_kappa_grid_floor():
    with pytest.raises(ValueError):
        kappa(TEST_FIELD, grid=100)


def test_haar_field_disjoint_supports_and_tail():
    spec = HaarField(0.25, 3.0, WeightFamily("power", 1.0), 63)
    x = (np.arange(256) + 0.5) / 256
    phi = spec.phi(np.arange(4, 8), x)  # level 2
    assert np.all(np.count_nonzero(phi, axis=0) == 1)
    rep = kappa(spec)
    # brute force with many more terms stays below grid part plus tail
    j = np.arange(1, 4096)
    brute = np.max(np.sum(np.abs(spec.phi(j, x)) / spec.b(j)[:, None], axis=0))
    assert brute <= rep.value + 1e-12


# ---------------------------------------------------------------- summability


@pytest.mark.parametrize(
    "family, exponent, pstar, expected",
    [("power", 3.0, 0.38, True), ("power", 1.0, 0.9, False), ("geometric", 0.0, 0.1, True),
     ("geometric", 0.0, 0.9, True), ("power", 3.0, 1 / 3, False)],
)
def test_summability(family, exponent, pstar, expected):
    spec = make_field("sine", 0.25, 3.0, family, exponent if family == "power" else 1.0, 128)
    res = check_summability(spec, pstar)
    assert res.converges is expected
    assert res.partial_sum > 0


def test_summability_total_matches_long_partial_sum():
    spec = make_field("sine", 0.25, 3.0, "power", 3.0, 64)
    res = check_summability(spec, 0.5)
    assert res.total == pytest.approx(zeta(1.5), rel=1e-12)


def test_summability_pstar_range():
    with pytest.raises(ValueError):
        check_summability(TEST_FIELD, 1.0)


def test_unknown_family():
    with pytest.raises(ValueError):
        make_field("matern", 0.25, 3.0)
    with pytest.raises(ValueError):
        WeightFamily("harmonic", 1.0)


# ---------------------------------------------------------------- norm constants


def test_delta_and_constants():
    kap = 0.2
    d = delta_kappa_alpha(kap, 2)
    assert d == pytest.approx(1.01 * 0.4 / math.log(2))
    assert C_kappa_alpha(kap, 2) == pytest.approx(1 / (1 - d))
    assert delta_kappa_alpha(0.345, 2) == 1 - 1e-6
    with pytest.raises(ValueError):
        C_kappa_alpha(0.4, 2)
    spec = FiniteField((lambda x: 0.1 + 0 * x,), (0.5,))
    expected = math.sqrt(1 / (1 - d)) * math.exp(kap**2 * 0.25 + 2 * kap * 0.5 / math.sqrt(2 * math.pi))
    assert C_prime_kappa_alpha(spec, kap, 2) == pytest.approx(expected)


@settings(max_examples=20)
@given(st.integers(1, 8), st.floats(-2, 2))
def test_truncation_monotonicity(extra, y1):
    v, w = (1,), tuple(range(1, 1 + extra + 1))
    a_v = eval_a(TEST_FIELD, x_grid, [[y1]], v)
    a_w = eval_a(TEST_FIELD, x_grid, [[y1] + [0.0] * extra], w)
    np.testing.assert_allclose(a_v, a_w, rtol=1e-15)
