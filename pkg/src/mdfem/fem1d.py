"""Lagrange finite elements for ``-(a u')' = f`` on (0, 1) with homogeneous Dirichlet data."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import solveh_banded

Func = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=None)
def _reference(r: int, nq: int):
    """Gauss points/weights on [0, 1] with Lagrange values and derivatives there."""
    xg, wg = np.polynomial.legendre.leggauss(nq)
    xq = 0.5 * (xg + 1.0)
    wq = 0.5 * wg
    nodes = np.linspace(0.0, 1.0, r + 1)
    V = np.empty((r + 1, nq))
    dV = np.empty((r + 1, nq))
    for i in range(r + 1):
        others = np.delete(nodes, i)
        denom = np.prod(nodes[i] - others)
        V[i] = np.prod(xq[None, :] - others[:, None], axis=0) / denom
        d = np.zeros(nq)
        for k in range(r):
            rest = np.delete(others, k)
            d += np.prod(xq[None, :] - rest[:, None], axis=0) if rest.size else 1.0
        dV[i] = d / denom
    return xq, wq, V, dV


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of ``elements`` cells carrying degree-``r`` Lagrange elements."""

    elements: int
    r: int = 1

    def __post_init__(self):
        if self.elements < 1 or self.r < 1:
            raise ValueError("need at least one element and degree r >= 1")

    @classmethod
    def from_h(cls, h: float, r: int = 1) -> "Mesh":
        n = round(1.0 / h)
        if n < 1 or abs(n * h - 1.0) > 1e-12:
            raise ValueError("h must be the reciprocal of an integer")
        return cls(n, r)

    @property
    def h(self) -> float:
        return 1.0 / self.elements

    @property
    def n_free(self) -> int:
        return self.r * self.elements - 1

    @property
    def nq(self) -> int:
        return self.r + 2

    @cached_property
    def quad_points(self) -> np.ndarray:
        """Physical quadrature points, shape ``(elements, r+2)``."""
        xq = _reference(self.r, self.nq)[0]
        left = np.arange(self.elements)[:, None] * self.h
        return left + self.h * xq[None, :]

    @cached_property
    def node_x(self) -> np.ndarray:
        """Coordinates of all global nodes including the two boundary nodes."""
        return np.linspace(0.0, 1.0, self.r * self.elements + 1)

    def _moment(self, g: Func) -> np.ndarray:
        """Vector ``int g phi_i`` over free nodes."""
        _, wq, V, _ = _reference(self.r, self.nq)
        gq = np.broadcast_to(np.asarray(g(self.quad_points), dtype=float), self.quad_points.shape)
        loc = self.h * (gq * wq[None, :]) @ V.T  # (elements, r+1)
        full = np.zeros(self.r * self.elements + 1)
        for i in range(self.r + 1):
            full[i:: self.r][: self.elements] += loc[:, i]
        return full[1:-1]


@dataclass(frozen=True)
class FemProblem:
    """Coefficient ``a``, source ``f`` and functional weight ``g`` (``G(v) = int g v``)."""

    coefficient: Func
    source: Func
    functional: Func


def _band_lower(mesh: Mesh, a_q: np.ndarray) -> np.ndarray:
    """Lower band storage ``Ab[t, j] = A[j+t, j]`` of the stiffness matrix.

    ``a_q`` holds the coefficient at the quadrature points, shape
    ``(S, elements, r+2)``; the result has shape ``(S, r+1, n_free)``.
    """
    r, N = mesh.r, mesh.elements
    _, wq, _, dV = _reference(r, mesh.nq)
    # element matrices  K_e[i, j] = (1/h) sum_q w_q a_q dV_i dV_j
    Ke = np.einsum("seq,iq,jq->seij", a_q * wq, dV, dV) / mesh.h
    S = a_q.shape[0]
    n = mesh.n_free
    Ab = np.zeros((S, r + 1, n))
    e = np.arange(N)
    for i in range(r + 1):
        for j in range(i + 1):
            gi = e * r + i - 1  # row (free numbering), gi >= gj
            gj = e * r + j - 1
            ok = (gj >= 0) & (gi < n)
            Ab[:, i - j, gj[ok]] += Ke[:, ok, i, j]
    return Ab


def assemble(p: FemProblem, mesh: Mesh) -> tuple[np.ndarray, np.ndarray]:
    """Lower-band stiffness matrix ``(r+1, n_free)`` and load vector."""
    a_q = np.asarray(p.coefficient(mesh.quad_points), dtype=float)
    a_q = np.broadcast_to(a_q, mesh.quad_points.shape)
    if not np.all(a_q > 0):
        raise ArithmeticError("coefficient is not positive at all quadrature nodes")
    return _band_lower(mesh, a_q[None])[0], mesh._moment(p.source)


def band_to_dense(Ab: np.ndarray) -> np.ndarray:
    """Symmetric dense matrix from lower band storage."""
    p, n = Ab.shape[0] - 1, Ab.shape[1]
    A = np.zeros((n, n))
    for t in range(p + 1):
        idx = np.arange(n - t)
        A[idx + t, idx] = Ab[t, : n - t]
        A[idx, idx + t] = Ab[t, : n - t]
    return A


def assemble_solve(p: FemProblem, mesh: Mesh) -> np.ndarray:
    """Galerkin solution as nodal values on ``mesh.node_x`` (boundary zeros included)."""
    Ab, F = assemble(p, mesh)
    if Ab.shape[1] == 1:
        # LAPACK's tridiagonal path rejects 1x1 systems
        return np.concatenate([[0.0], F / Ab[0], [0.0]])
    try:
        u = solveh_banded(Ab, F, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError("stiffness matrix is not positive definite") from exc
    return np.concatenate([[0.0], u, [0.0]])


def apply_G(p: FemProblem, sol: np.ndarray, mesh: Mesh) -> float:
    """``int g u_h`` by element-wise Gauss quadrature of order r+2."""
    return float(mesh._moment(p.functional) @ sol[1:-1])


def evaluate(sol: np.ndarray, mesh: Mesh, x: np.ndarray) -> np.ndarray:
    """Point values of the finite element function with nodal vector ``sol``."""
    x = np.asarray(x, dtype=float)
    r = mesh.r
    e = np.minimum((x * mesh.elements).astype(np.int64), mesh.elements - 1)
    loc = x * mesh.elements - e
    nodes = np.linspace(0.0, 1.0, r + 1)
    out = np.zeros_like(x)
    for i in range(r + 1):
        others = np.delete(nodes, i)
        li = np.prod(loc[..., None] - others, axis=-1) / np.prod(nodes[i] - others)
        out += sol[e * r + i] * li
    return out


def l2_error(sol: np.ndarray, mesh: Mesh, exact: Func, nq: int = 8) -> float:
    """L2 norm of ``u_h - exact`` using ``nq`` Gauss points per element."""
    xg, wg = np.polynomial.legendre.leggauss(nq)
    x = (np.arange(mesh.elements)[:, None] + 0.5 * (xg[None, :] + 1.0)) * mesh.h
    diff = evaluate(sol, mesh, x) - exact(x)
    return float(np.sqrt(np.sum(0.5 * mesh.h * wg[None, :] * diff**2)))


def banded_ldl_solve(Ab: np.ndarray, F: np.ndarray) -> np.ndarray:
    """Solve many SPD banded systems at once by LDL^T, vectorised over the batch.

    ``Ab`` has shape ``(S, p+1, n)`` in lower band storage; ``F`` is ``(n,)`` or
    ``(S, n)``.  Returns the ``(S, n)`` solutions.
    """
    S, p1, n = Ab.shape
    p = p1 - 1
    if n > 1 and S * 8 < n:
        # small batch on a fine mesh: per-sample LAPACK beats the row loop
        Fb = np.broadcast_to(F, (S, n))
        try:
            return np.stack([solveh_banded(Ab[k], Fb[k], lower=True) for k in range(S)])
        except np.linalg.LinAlgError as exc:
            raise ArithmeticError("stiffness matrix is not positive definite") from exc
    L = np.zeros((S, p + 1, n))  # L[:, t, j] = L[j+t, j]
    D = np.empty((S, n))
    with np.errstate(divide="ignore", invalid="ignore"):
        for j in range(n):
            d = Ab[:, 0, j].copy()
            for k in range(max(0, j - p), j):
                d -= L[:, j - k, k] ** 2 * D[:, k]
            D[:, j] = d
            for i in range(j + 1, min(n, j + p + 1)):
                val = Ab[:, i - j, j].copy()
                for k in range(max(0, i - p), j):
                    val -= L[:, i - k, k] * L[:, j - k, k] * D[:, k]
                L[:, i - j, j] = val / d
    if not np.all(D > 0):
        raise ArithmeticError("stiffness matrix is not positive definite")
    z = np.array(np.broadcast_to(F, (S, n)), dtype=float)
    for i in range(n):
        for k in range(max(0, i - p), i):
            z[:, i] -= L[:, i - k, k] * z[:, k]
    z /= D
    for i in range(n - 1, -1, -1):
        for k in range(i + 1, min(n, i + p + 1)):
            z[:, i] -= L[:, k - i, i] * z[:, k]
    return z


def functional_batch(mesh: Mesh, a_q: np.ndarray, source: Func, functional: Func) -> np.ndarray:
    """``G(u_h)`` for a batch of coefficient samples given at the quadrature points.

    ``a_q`` has shape ``(S, elements, r+2)``.
    """
    if not np.all(a_q > 0):
        raise ArithmeticError("coefficient is not positive at all quadrature nodes")
    Ab = _band_lower(mesh, a_q)
    u = banded_ldl_solve(Ab, mesh._moment(source))
    return u @ mesh._moment(functional)
