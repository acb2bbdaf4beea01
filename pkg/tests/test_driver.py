import math

import numpy as np
import pytest

from mdfem import driver, fem1d
from mdfem.allocate import cost_of
from mdfem.randomfield import FiniteField, make_field

one = lambda x: np.ones_like(x)


def sine_terms(k, c=0.25):
    return tuple((lambda x, j=j: c * j**-3.0 * np.sin(j * math.pi * x)) for j in range(1, k + 1))


FIELD3 = FiniteField(sine_terms(3), (1.0, 0.125, 1 / 27))
P3 = driver.ProblemSpec(FIELD3, pstar=0.38)
ZERO_FIELD = FiniteField((lambda x: 0 * x, lambda x: 0 * x), (0.5, 0.25))
TEST_PROBLEM = driver.ProblemSpec(make_field("sine", 0.25, 3.0, "power", 3.0, 256))
MESH = fem1d.Mesh(16, 1)


def direct_G(field, y, mesh):
    """Single-sample solve through the scalar FE path."""
    coef = lambda x: np.exp(sum(yj * f(x) for yj, f in zip(y, field.funcs)))
    p = fem1d.FemProblem(coef, one, one)
    return fem1d.apply_G(p, fem1d.assemble_solve(p, mesh), mesh)


def test_anchor_term_is_single_solve():
    assert driver.evaluate_Guu(P3, (), (), MESH) == pytest.approx(1 / 12 - MESH.h**2 / 12, abs=1e-15)


@pytest.mark.parametrize("u, y", [((1, 2), (0.0, 1.3)), ((1, 2, 3), (0.7, -0.4, 0.0)), ((2,), (0.0,))])
def test_anchored_zero(u, y):
    assert abs(driver.evaluate_Guu(P3, u, y, MESH)) <= 1e-10 * (1 / 12)


@pytest.mark.parametrize("y1", [-2.5, 0.3, 1.7])
def test_single_index_term_is_difference(y1):
    expected = direct_G(FIELD3, [y1], MESH) - direct_G(FIELD3, [0.0], MESH)
    assert driver.evaluate_Guu(P3, (1,), (y1,), MESH) == pytest.approx(expected, rel=1e-12)


def test_two_index_term_inclusion_exclusion():
    y = (0.9, -1.1)
    G = lambda a, b: direct_G(FIELD3, [a, b], MESH)
    expected = G(*y) - G(y[0], 0.0) - G(0.0, y[1]) + G(0.0, 0.0)
    assert driver.evaluate_Guu(P3, (1, 2), y, MESH) == pytest.approx(expected, rel=1e-10)


def test_batched_solve_matches_scalar_path():
    Y = np.random.default_rng(3).normal(size=(7, 3))
    batch = driver.solve_G(P3, MESH, Y, (1, 2, 3))
    np.testing.assert_allclose(batch, [direct_G(FIELD3, y, MESH) for y in Y], rtol=1e-12)


def test_solver_failure_carries_context():
    bad = driver.ProblemSpec(FiniteField((lambda x: 1000 + 0 * x,), (1.0,)))
    with pytest.raises(ArithmeticError, match=r"u=\(1,\)"):
        driver.anchored_G(bad, (1,), np.array([[1.0]]), MESH)


def test_problem_checks_degree():
    with pytest.raises(ValueError):
        driver.ProblemSpec(FIELD3, tau=4.0, r=1)


# ---------------------------------------------------------------- run


def test_huge_epsilon_runs_anchor_only():
    res = driver.run(P3, 50.0)
    assert res.aset.subsets == ((),)
    assert res.solves == 1
    mesh = fem1d.Mesh(res.alloc.entries[0].elements, 1)
    assert res.result == pytest.approx(driver.evaluate_Guu(P3, (), (), mesh), rel=1e-14)


@pytest.mark.parametrize("eps", [0.1, 0.01, 1e-3])
def test_zero_field_gives_deterministic_answer(eps):
    res = driver.run(driver.ProblemSpec(ZERO_FIELD), eps)
    h = res.alloc.entries[0].h
    assert res.result == pytest.approx(1 / 12 - h * h / 12, abs=1e-14)


def test_run_bookkeeping_and_determinism():
    a = driver.run(P3, 3e-3)
    b = driver.run(P3, 3e-3)
    assert a.result == b.result
    assert a.to_csv() == b.to_csv()
    assert a.model_cost == cost_of(a.alloc)
    assert [c.u for c in a.contributions] == list(a.aset.subsets)
    assert a.result == pytest.approx(sum(c.value for c in a.contributions), rel=1e-14)
    assert a.diagnostics["truncation_certificate"] <= 3e-3 / 2
    s = a.summary()
    assert s["n_sets"] == len(a.aset) and s["max_card"] >= 1
    assert a.to_csv().splitlines()[0] == "u;n_u;h_u;contribution;cost"


def test_run_small_field_against_reference():
    ref = driver.tensor_expectation(P3, [30, 12, 8], fem1d.Mesh(2048, 1))
    for eps in (1e-2, 3e-3):
        res = driver.run(P3, eps)
        assert abs(res.result - ref) <= eps


def test_strict_rejects_uncertified_field():
    with pytest.raises(ValueError, match="not admissible"):
        driver.run(TEST_PROBLEM, 0.5, strict=True)
    diag = driver.admissibility(TEST_PROBLEM, 2)
    assert diag["kappa"] == math.inf and diag["summable"]


def test_strict_accepts_certified_field():
    spec = driver.ProblemSpec(make_field("sine", 0.25, 6.0, "power", 3.0, 256))
    assert driver.run(spec, 5.0, strict=True).diagnostics["kappa_ok"]


# ---------------------------------------------------------------- reference


def test_gauss_hermite_moments():
    x, w = driver.gauss_hermite(10)
    assert np.sum(w) == pytest.approx(1.0)
    assert np.sum(w * x**2) == pytest.approx(1.0)
    assert np.sum(w * x**4) == pytest.approx(3.0)


def test_reference_of_zero_field():
    val = driver.reference(driver.ProblemSpec(ZERO_FIELD), 2, 4, 1 / 64)
    assert val == pytest.approx(1 / 12 - (1 / 64) ** 2 / 12, abs=1e-15)


def test_reference_paths_agree():
    spec = driver.ProblemSpec(FiniteField(sine_terms(1, 0.5), (1.0,)))
    gh = driver.reference(spec, 1, 40, 1 / 256)
    qmc = driver.reference(spec, 1, 2**14, 1 / 256, method="qmc")
    assert gh == pytest.approx(qmc, abs=1e-6)


def test_reference_self_check():
    spec = driver.ProblemSpec(FiniteField(sine_terms(1), (1.0,)))
    driver.reference(spec, 1, 20, 1 / 512, tol=1e-5)
    with pytest.raises(driver.ReferenceNotConverged):
        driver.reference(spec, 1, 2, 1 / 4, tol=1e-12)


def test_reference_guards():
    with pytest.raises(ValueError):
        driver.reference(P3, 11, 4, 1 / 8)
    with pytest.raises(ValueError):
        driver.reference(P3, 6, 4, 1 / 8)
    with pytest.raises(ValueError):
        driver.reference(P3, 2, 12, 1 / 8, method="qmc")


def test_mdm_sum_equals_tensor_expectation():
    orders = [12, 8, 6]
    full = driver.tensor_expectation(P3, orders, MESH)
    assert driver.mdm_tensor_sum(P3, orders, MESH) == pytest.approx(full, abs=1e-12)


def test_calibration_in_range():
    cal = driver.calibrate_c(P3, m_range=range(3, 7))
    assert 0 < cal.c <= 1
    assert cal.fe_constant == pytest.approx(1 / 12, rel=1e-3)
