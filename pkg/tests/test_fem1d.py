import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mdfem.fem1d import (
    FemProblem,
    Mesh,
    apply_G,
    assemble,
    assemble_solve,
    band_to_dense,
    banded_ldl_solve,
    evaluate,
    functional_batch,
    l2_error,
)

one = lambda x: np.ones_like(x)
zero = lambda x: np.zeros_like(x)
pi2sin = lambda x: math.pi**2 * np.sin(math.pi * x)


def slope(h, err):
    return np.polyfit(np.log(h), np.log(err), 1)[0]


@pytest.mark.parametrize("elements", [1, 3, 8, 33])
def test_p1_nodally_exact(elements):
    mesh = Mesh(elements, 1)
    sol = assemble_solve(FemProblem(one, one, one), mesh)
    x = mesh.node_x
    np.testing.assert_allclose(sol, x * (1 - x) / 2, atol=1e-14)


@pytest.mark.parametrize("r", [1, 2, 3])
def test_zero_source_zero_solution(r):
    assert not np.any(assemble_solve(FemProblem(one, zero, one), Mesh(7, r)))


@pytest.mark.parametrize("elements", [4, 16, 64])
def test_functional_of_quadratic(elements):
    mesh = Mesh(elements, 1)
    p = FemProblem(one, one, one)
    h = mesh.h
    # int of the P1 interpolant of x(1-x)/2 is 1/12 - h^2/12
    assert apply_G(p, assemble_solve(p, mesh), mesh) == pytest.approx(1 / 12 - h * h / 12, abs=1e-14)
    p2 = Mesh(elements, 2)
    assert apply_G(p, assemble_solve(p, p2), p2) == pytest.approx(1 / 12, abs=1e-13)


def test_zero_functional():
    mesh = Mesh(8, 1)
    p = FemProblem(one, one, zero)
    assert apply_G(p, assemble_solve(p, mesh), mesh) == 0.0


def test_l2_rate_r1():
    hs, errs = [], []
    for k in range(3, 10):
        mesh = Mesh(1 << k, 1)
        sol = assemble_solve(FemProblem(one, pi2sin, one), mesh)
        hs.append(mesh.h)
        errs.append(l2_error(sol, mesh, lambda x: np.sin(math.pi * x)))
    assert slope(hs, errs) == pytest.approx(2.0, abs=0.2)


@pytest.mark.parametrize("r", [1, 2])
def test_functional_rate_against_richardson(r):
    # smooth g and variable a; reference by Richardson extrapolation on fine meshes
    a = lambda x: 1.0 + 0.5 * np.sin(2 * math.pi * x)
    g = lambda x: np.exp(x)
    p = FemProblem(a, pi2sin, g)
    G = lambda n: apply_G(p, assemble_solve(p, Mesh(n, r)), Mesh(n, r))
    order = 2 * r
    ref = (2**order * G(4096) - G(2048)) / (2**order - 1)
    levels = range(2, 7) if r == 2 else range(3, 10)
    hs = [2.0**-k for k in levels]
    errs = [abs(G(1 << k) - ref) for k in levels]
    assert -slope(1 / np.array(hs), errs) >= 2 * r - 0.3
    assert all(e1 > e2 for e1, e2 in zip(errs, errs[1:]))


def test_stiffness_symmetric_and_residual_small():
    mesh = Mesh(20, 2)
    p = FemProblem(lambda x: np.exp(np.sin(3 * x)), pi2sin, one)
    Ab, F = assemble(p, mesh)
    A = band_to_dense(Ab)
    assert np.max(np.abs(A - A.T)) <= 1e-13 * np.max(np.abs(A))
    u = assemble_solve(p, mesh)[1:-1]
    assert np.linalg.norm(A @ u - F) <= 1e-12 * np.linalg.norm(F)


def test_nonpositive_coefficient_rejected():
    with pytest.raises(ArithmeticError):
        assemble_solve(FemProblem(lambda x: x - 0.5, one, one), Mesh(8, 1))


def test_two_element_mesh():
    mesh = Mesh(2, 1)
    sol = assemble_solve(FemProblem(one, one, one), mesh)
    assert sol.tolist() == pytest.approx([0.0, 0.125, 0.0])


def test_mesh_validation():
    assert Mesh.from_h(0.125, 2).n_free == 15
    with pytest.raises(ValueError):
        Mesh.from_h(0.3)
    with pytest.raises(ValueError):
        Mesh(0)


def test_evaluate_interpolates_nodes():
    mesh = Mesh(5, 3)
    sol = np.random.default_rng(0).normal(size=mesh.r * mesh.elements + 1)
    np.testing.assert_allclose(evaluate(sol, mesh, mesh.node_x), sol, atol=1e-13)


@settings(max_examples=15, deadline=None)
@given(st.integers(1, 3), st.integers(2, 30), st.integers(1, 5), st.integers(0, 2**31))
def test_batched_ldl_matches_dense_solve(r, elements, batch, seed):
    mesh = Mesh(elements, r)
    rng = np.random.default_rng(seed)
    a_q = np.exp(rng.normal(size=(batch,) + mesh.quad_points.shape))
    from mdfem.fem1d import _band_lower

    Ab = _band_lower(mesh, a_q)
    F = rng.normal(size=(batch, mesh.n_free))
    U = banded_ldl_solve(Ab, F)
    for b in range(batch):
        np.testing.assert_allclose(U[b], np.linalg.solve(band_to_dense(Ab[b]), F[b]), rtol=1e-9, atol=1e-12)


def test_functional_batch_matches_single_solves():
    mesh = Mesh(16, 1)
    xq = mesh.quad_points
    coeffs = [lambda x: 1 + x, lambda x: np.exp(-x)]
    a_q = np.stack([c(xq) for c in coeffs])
    batch = functional_batch(mesh, a_q, one, one)
    for c, val in zip(coeffs, batch):
        p = FemProblem(c, one, one)
        assert val == pytest.approx(apply_G(p, assemble_solve(p, mesh), mesh), rel=1e-13)
