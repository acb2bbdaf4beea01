"""Assembly of the MDFEM estimate and brute-force reference values."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from . import fem1d
from .allocate import Allocation, RateParams, allocate, cost_of, derive_rates, pounds
from .gausscube import constant_M, integrate, make_cubature
from .mdm import ActiveSet, FiniteB, Weights, build_active_set, gray_code_subsets, truncation_certificate
from .randomfield import FieldSpec, FiniteField, TailBoundUnavailable, check_summability, kappa

Func = Callable[[np.ndarray], np.ndarray]
BATCH_ENTRIES = 1 << 22  # cap on samples * quadrature points held at once


def _one(x):
    return np.ones_like(x)


@dataclass(frozen=True)
class ProblemSpec:
    """Random field, PDE data and rate parameters of an MDFEM problem."""

    field: FieldSpec
    source: Func = _one
    functional: Func = _one
    r: int = 1
    tau: float = 2.0
    dprime: float = 1.0
    pstar: float = 0.38

    def __post_init__(self):
        if self.r < math.ceil(self.tau / 2):
            raise ValueError("element degree r must be at least ceil(tau/2)")

    def weights(self, M: float) -> Weights:
        if isinstance(self.field, FiniteField):
            return Weights(FiniteB(tuple(self.field.weights)), M)
        return Weights(self.field.b, M)


def solve_G(problem: ProblemSpec, mesh: fem1d.Mesh, Y: np.ndarray, v: Sequence[int]) -> np.ndarray:
    """``G(u^h(., y_v))`` for every row of ``Y`` (shape ``(S, |v|)``)."""
    Y = np.asarray(Y, dtype=float)
    xq = mesh.quad_points
    if not v:
        a_q = np.ones((1,) + xq.shape)
        S = Y.shape[0] if Y.ndim == 2 else 1
        return np.repeat(fem1d.functional_batch(mesh, a_q, problem.source, problem.functional), S)
    Y = Y.reshape(-1, len(v))
    S = Y.shape[0]
    phi = problem.field.phi(np.asarray(v), xq.ravel())
    out = np.empty(S)
    chunk = max(1, BATCH_ENTRIES // xq.size)
    for lo in range(0, S, chunk):
        z = Y[lo: lo + chunk] @ phi
        if np.any(np.abs(z) > 700.0):
            raise ArithmeticError("log-coefficient exceeds 700 at a cubature node")
        a_q = np.exp(z).reshape((-1,) + xq.shape)
        out[lo: lo + chunk] = fem1d.functional_batch(mesh, a_q, problem.source, problem.functional)
    return out


def anchored_G(problem: ProblemSpec, u: Sequence[int], Y: np.ndarray, mesh: fem1d.Mesh) -> np.ndarray:
    """``G(u_u^h)`` at each row of ``Y``: alternating sum of v-truncated solves on one mesh.

    Subsets are visited in Gray-code order; the anchor solve is shared by all nodes.
    """
    u = tuple(u)
    Y = np.asarray(Y, dtype=float)
    if not u:
        return solve_G(problem, mesh, Y.reshape(-1, 0) if Y.size else np.zeros((max(1, len(Y)), 0)), ())
    Y = Y.reshape(-1, len(u))
    col = {j: i for i, j in enumerate(u)}
    total = np.zeros(Y.shape[0])
    for v, sign in gray_code_subsets(u):
        if not v:
            total += sign * solve_G(problem, mesh, np.zeros((1, 0)), ())[0]
            continue
        try:
            total += sign * solve_G(problem, mesh, Y[:, [col[j] for j in v]], v)
        except ArithmeticError as exc:
            raise ArithmeticError(f"FEM failure for u={u}, v={v}: {exc}") from exc
    return total


def evaluate_Guu(problem: ProblemSpec, u: Sequence[int], y_u: Sequence[float], mesh: fem1d.Mesh) -> float:
    """Single-node version of :func:`anchored_G`."""
    return float(anchored_G(problem, u, np.asarray(y_u, dtype=float)[None, :], mesh)[0])


@dataclass(frozen=True)
class Contribution:
    u: tuple[int, ...]
    n: int
    h: float
    value: float
    cost: float


@dataclass
class MdfemRun:
    problem: ProblemSpec
    rates: RateParams
    epsilon: float
    aset: ActiveSet
    alloc: Allocation
    result: float
    contributions: list[Contribution]
    model_cost: float
    solves: int
    wall_ms: float
    diagnostics: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["u;n_u;h_u;contribution;cost"]
        for c in self.contributions:
            lines.append(f"{','.join(map(str, c.u))};{c.n};{c.h:.17g};{c.value:.17g};{c.cost:.17g}")
        return "\n".join(lines) + "\n"

    def summary(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "result": self.result,
            "lambda": self.rates.lam,
            "alpha": self.rates.alpha,
            "n_sets": len(self.aset),
            "evaluated_sets": sum(1 for c in self.contributions if c.n >= 2 or not c.u),
            "max_card": max(len(u) for u in self.aset.subsets),
            "model_cost": self.model_cost,
            "fem_solves": self.solves,
            "wall_ms": self.wall_ms,
            **self.diagnostics,
        }


def admissibility(problem: ProblemSpec, alpha: int) -> dict:
    """Kappa and summability diagnostics; infinite kappa when no tail bound exists."""
    try:
        kap = kappa(problem.field).value
    except TailBoundUnavailable:
        kap = math.inf
    summ = check_summability(problem.field, problem.pstar)
    return {
        "kappa": kap,
        "kappa_limit": math.log(2.0) / alpha,
        "kappa_ok": kap < math.log(2.0) / alpha,
        "summable": summ.converges,
    }


def run(problem: ProblemSpec, epsilon: float, mode: str = "practical", c: float = 1.0,
        strict: bool = False) -> MdfemRun:
    """MDFEM estimate of ``E[G(u)]`` for tolerance ``epsilon``.

    With ``strict`` the admissibility conditions must be certified; otherwise
    they are only reported in the diagnostics.
    """
    t0 = time.perf_counter()
    rates = derive_rates(problem.pstar, problem.tau, problem.dprime)
    diag = admissibility(problem, rates.alpha)
    if strict and not (diag["kappa_ok"] and diag["summable"]):
        raise ValueError(f"problem not admissible: {diag}")
    if not diag["summable"]:
        raise ValueError("weights b_j are not p*-summable")
    M = constant_M(rates.alpha)
    w = problem.weights(M)
    aset = build_active_set(w, epsilon, problem.pstar)
    alloc = allocate(rates, aset, epsilon, mode, c)
    contribs: list[Contribution] = []
    solves = 0
    for e in alloc.entries:
        mesh = fem1d.Mesh(e.elements, problem.r)
        cost = e.n * e.h ** (-problem.dprime) * pounds(len(e.u))
        if not e.u:
            val = float(solve_G(problem, mesh, np.zeros((1, 0)), ())[0])
            solves += 1
        elif e.n <= 1:
            val = 0.0
        else:
            m = e.n.bit_length() - 1
            cub = make_cubature(m, len(e.u), rates.alpha, rates.lam)
            val = integrate(cub, lambda z, u=e.u, mesh=mesh: anchored_G(problem, u, z, mesh))
            solves += e.n * ((1 << len(e.u)) - 1) + 1
        contribs.append(Contribution(e.u, e.n, e.h, val, cost))
    result = float(np.sum(np.array([c_.value for c_ in contribs])))
    diag["truncation_certificate"] = truncation_certificate(w, aset)
    diag["apriori_bound"] = diag["truncation_certificate"] + math.fsum(
        e.a / max(1.0, float(e.n)) ** rates.lam + 2.0 ** len(e.u) * e.h**problem.tau
        for e in alloc.entries
    )
    wall = 1e3 * (time.perf_counter() - t0)
    return MdfemRun(problem, rates, epsilon, aset, alloc, result, contribs, cost_of(alloc),
                    solves, wall, diag)


def gauss_hermite(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Hermite rule for the standard normal density."""
    x, w = hermegauss(order)
    return x, w / math.sqrt(2.0 * math.pi)


def _tensor_rule(orders: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    rules = [gauss_hermite(o) for o in orders]
    grids = np.meshgrid(*[r[0] for r in rules], indexing="ij")
    wgrid = np.meshgrid(*[r[1] for r in rules], indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=1)
    weights = np.prod(np.stack([g.ravel() for g in wgrid], axis=1), axis=1)
    return nodes, weights


def tensor_expectation(problem: ProblemSpec, orders: Sequence[int], mesh: fem1d.Mesh) -> float:
    """Tensor Gauss-Hermite expectation of ``G(u^h(., y_{1:s}))``."""
    s = len(orders)
    nodes, weights = _tensor_rule(orders)
    vals = solve_G(problem, mesh, nodes, tuple(range(1, s + 1)))
    return float(np.sum(weights * vals))


def mdm_tensor_sum(problem: ProblemSpec, orders: Sequence[int], mesh: fem1d.Mesh) -> float:
    """``sum_{u subset 1:s} Q_u(G(u_u^h))`` with tensor Gauss-Hermite rules per subset."""
    s = len(orders)
    total = []
    for k in range(1 << s):
        u = tuple(j + 1 for j in range(s) if (k >> j) & 1)
        if not u:
            total.append(float(solve_G(problem, mesh, np.zeros((1, 0)), ())[0]))
            continue
        nodes, weights = _tensor_rule([orders[j - 1] for j in u])
        total.append(float(np.sum(weights * anchored_G(problem, u, nodes, mesh))))
    return float(np.sum(np.array(total)))


class ReferenceNotConverged(ArithmeticError):
    pass


def default_orders(problem: ProblemSpec, s_ref: int, n_ref: int) -> list[int]:
    """Anisotropic Gauss-Hermite orders shrinking with the size of ``phi_j``."""
    bounds = problem.field.phi_bound(np.arange(1, s_ref + 1))
    lead = bounds[0] if bounds[0] > 0 else 1.0
    return [max(3, int(math.ceil(n_ref * (b / lead) ** 0.25))) if b > 0 else 1 for b in bounds]


def reference(problem: ProblemSpec, s_ref: int, n_ref: int, h_ref: float,
              method: str = "gauss-hermite", orders: Sequence[int] | None = None,
              tol: float | None = None, alpha: int = 2) -> float:
    """``s_ref``-truncated expectation at mesh width ``h_ref``.

    ``gauss-hermite`` uses a tensor rule (``s_ref <= 5``) with ``orders`` or
    anisotropic defaults derived from ``n_ref``; ``qmc`` uses one interlaced rule
    with ``n_ref`` points (``s_ref <= 10``).  With ``tol`` the value is recomputed
    with ``h_ref/2`` and doubled ``n_ref`` and must agree to ``tol``.
    """
    if not 1 <= s_ref <= 10:
        raise ValueError("s_ref must lie in [1, 10]")
    mesh = fem1d.Mesh.from_h(h_ref, problem.r)

    def value(n: int, mesh_: fem1d.Mesh, ords) -> float:
        if method == "gauss-hermite":
            if s_ref > 5:
                raise ValueError("tensor Gauss-Hermite reference limited to s_ref <= 5")
            o = list(ords) if ords is not None else default_orders(problem, s_ref, n)
            return tensor_expectation(problem, o, mesh_)
        if method == "qmc":
            m = int(round(math.log2(n)))
            if 1 << m != n:
                raise ValueError("n_ref must be a power of two for the qmc reference")
            cub = make_cubature(m, s_ref, alpha, 1.0)
            return integrate(cub, lambda z: solve_G(problem, mesh_, z, tuple(range(1, s_ref + 1))))
        raise ValueError(f"unknown reference method {method!r}")

    val = value(n_ref, mesh, orders)
    if tol is not None:
        finer = fem1d.Mesh(mesh.elements * 2, problem.r)
        ords2 = None if orders is None else [2 * o for o in orders]
        val2 = value(2 * n_ref, finer, ords2)
        if abs(val2 - val) >= tol:
            raise ReferenceNotConverged(f"reference changed by {abs(val2 - val):.3g} >= {tol:g}")
    return val


@dataclass(frozen=True)
class Calibration:
    c: float
    fe_constant: float
    cubature_constant: float


def calibrate_c(problem: ProblemSpec, elements: int = 16, m_range: Sequence[int] = range(3, 9),
                gh_order: int = 40) -> Calibration:
    """Practical constant ``c`` matching the model error ratio to measured errors.

    The model predicts a finite element error ``2^|u| h^tau`` and a cubature
    error ``a_u n^-lambda``.  Both hidden constants are measured on the leading
    terms: the anchor solve for the finite element part (two meshes) and the
    ``u = {1}`` term for the cubature part (worst ratio over ``m_range`` against
    a Gauss-Hermite value on the same mesh).  ``c`` rescales ``a_{1}`` so the
    ratio of the two constants matches the measurement.
    """
    rates = derive_rates(problem.pstar, problem.tau, problem.dprime)
    coarse = fem1d.Mesh(elements, problem.r)
    fine = fem1d.Mesh(2 * elements, problem.r)
    g0 = solve_G(problem, coarse, np.zeros((1, 0)), ())[0]
    g1 = solve_G(problem, fine, np.zeros((1, 0)), ())[0]
    fe_const = abs(g0 - g1) / (coarse.h**problem.tau * (1.0 - 2.0**-problem.tau))
    x, w = gauss_hermite(gh_order)
    exact = float(np.sum(w * anchored_G(problem, (1,), x[:, None], coarse)))
    worst = 0.0
    for m in m_range:
        cub = make_cubature(m, 1, rates.alpha, rates.lam)
        q = integrate(cub, lambda z: anchored_G(problem, (1,), z, coarse))
        worst = max(worst, abs(q - exact) * 2.0 ** (m * rates.lam))
    gamma1 = math.sqrt(2.0) * float(problem.weights(1.0).b(1))
    cub_const = worst / (gamma1 * 2.0**rates.lam)
    if fe_const == 0 or cub_const == 0:
        return Calibration(1.0, fe_const, cub_const)
    return Calibration(min(1.0, cub_const / fe_const), fe_const, cub_const)
