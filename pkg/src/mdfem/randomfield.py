"""Lognormal diffusion coefficients ``a(x, y) = exp(sum_j y_j phi_j(x))`` on D = (0, 1)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

EXP_LIMIT = 700.0
KAPPA_GRID = 4096


class TailBoundUnavailable(ArithmeticError):
    """The phi/b pairing admits no finite analytic bound for the kappa tail."""


@dataclass(frozen=True)
class WeightFamily:
    """Weights ``b_j``: ``power`` is ``j**-exponent``, ``geometric`` is ``2**-j``."""

    kind: str = "power"
    exponent: float = 3.0

    def __post_init__(self):
        if self.kind not in ("power", "geometric"):
            raise ValueError(f"unknown weight family {self.kind!r}")
        if self.kind == "power" and self.exponent <= 0:
            raise ValueError("power weights need a positive exponent")

    def __call__(self, j) -> np.ndarray:
        j = np.asarray(j, dtype=float)
        if self.kind == "power":
            return j ** (-self.exponent)
        return 2.0 ** (-j)

    def converges(self, pstar: float) -> bool:
        """True iff ``sum_j b_j**pstar`` is finite."""
        if self.kind == "power":
            return self.exponent * pstar > 1.0
        return True

    def tail_power_sum(self, e: float, J: int) -> float:
        """``sum_{j > J} b_j**e`` in closed form (``inf`` when divergent)."""
        if self.kind == "power":
            q = self.exponent * e
            return float(special.zeta(q, J + 1)) if q > 1 else math.inf
        return 2.0 ** (-(J + 1) * e) / (1.0 - 2.0 ** (-e))


class FieldSpec:
    """Base class for an indexed family ``phi_j`` with weights ``b_j``."""

    b: WeightFamily
    jmax: int

    n_terms: int | None = None  # None means infinitely many terms

    def phi(self, j: np.ndarray, x: np.ndarray) -> np.ndarray:
        """Matrix of ``phi_j(x)``, shape ``(len(j), len(x))``; j is 1-based."""
        raise NotImplementedError

    def phi_bound(self, j: np.ndarray) -> np.ndarray:
        """Upper bound for ``sup_x |phi_j(x)|``."""
        raise NotImplementedError

    def kappa_tail(self, J: int) -> float:
        """Analytic bound for ``sup_x sum_{j>J} |phi_j(x)| / b_j``."""
        raise NotImplementedError

    def b_values(self, j) -> np.ndarray:
        return self.b(j)


@dataclass(frozen=True)
class SineField(FieldSpec):
    """``phi_j(x) = c j**-sigma sin(j pi x)``."""

    c: float = 0.25
    sigma: float = 3.0
    b: WeightFamily = field(default_factory=WeightFamily)
    jmax: int = 256

    def phi(self, j, x):
        j = np.asarray(j, dtype=float)[:, None]
        x = np.asarray(x, dtype=float)[None, :]
        return self.c * j ** (-self.sigma) * np.sin(j * math.pi * x)

    def phi_bound(self, j):
        return abs(self.c) * np.asarray(j, dtype=float) ** (-self.sigma)

    def kappa_tail(self, J):
        # |sin| <= 1 so the tail is bounded by sum_{j>J} |c| j^-sigma / b_j
        if self.b.kind == "power":
            q = self.sigma - self.b.exponent
            if q <= 1:
                raise TailBoundUnavailable(
                    f"sum |phi_j|/b_j diverges for sigma - b_exponent = {q:g} <= 1"
                )
            return abs(self.c) * float(special.zeta(q, J + 1))
        raise TailBoundUnavailable("polynomially decaying phi_j over geometric b_j diverges")


@dataclass(frozen=True)
class HaarField(FieldSpec):
    """Haar-like piecewise constants: ``j = 2**l + k`` gives ``c 2**(-sigma l) psi_{l,k}``.

    ``psi_{l,k}`` is +1 on the left half and -1 on the right half of
    ``[k 2**-l, (k+1) 2**-l)``.  Supports within one level are disjoint.
    """

    c: float = 0.25
    sigma: float = 3.0
    b: WeightFamily = field(default_factory=WeightFamily)
    jmax: int = 256

    def phi(self, j, x):
        j = np.asarray(j, dtype=np.int64)[:, None]
        x = np.asarray(x, dtype=float)[None, :]
        level = np.floor(np.log2(j)).astype(np.int64)
        k = j - (1 << level)
        scale = 2.0**level
        loc = x * scale - k
        inside = (loc >= 0) & (loc < 1)
        sign = np.where(loc < 0.5, 1.0, -1.0)
        return self.c * 2.0 ** (-self.sigma * level) * inside * sign

    def phi_bound(self, j):
        level = np.floor(np.log2(np.asarray(j, dtype=float)))
        return abs(self.c) * 2.0 ** (-self.sigma * level)

    def kappa_tail(self, J):
        # one active index per level; bound 1/b_j by its value at the level's last index
        L = int(math.floor(math.log2(J + 1)))
        if self.b.kind == "power":
            beta = self.b.exponent
            r = 2.0 ** (beta - self.sigma)
            if r >= 1:
                raise TailBoundUnavailable("Haar tail diverges for b_exponent >= sigma")
            # levels >= L may still hold indices > J; include level L entirely
            return abs(self.c) * 2.0**beta * r**L / (1.0 - r)
        raise TailBoundUnavailable("geometric b_j decays faster than any Haar level scale")


@dataclass(frozen=True)
class FiniteField(FieldSpec):
    """Finitely many user-supplied ``phi_j`` with explicit weights."""

    funcs: tuple[Callable[[np.ndarray], np.ndarray], ...] = ()
    weights: tuple[float, ...] = ()
    jmax: int = 0

    def __post_init__(self):
        if len(self.funcs) != len(self.weights):
            raise ValueError("need one weight per function")
        if any(not 0 < w <= 1 for w in self.weights):
            raise ValueError("weights must lie in (0, 1]")
        object.__setattr__(self, "jmax", len(self.funcs))

    @property
    def n_terms(self) -> int:
        return len(self.funcs)

    @property
    def b(self):
        return self.b_values

    def b_values(self, j):
        j = np.asarray(j, dtype=np.int64)
        w = np.asarray(self.weights + (0.0,), dtype=float)
        return w[np.where(j <= len(self.weights), j - 1, len(self.weights))]

    def phi(self, j, x):
        x = np.asarray(x, dtype=float)
        rows = []
        for jj in np.asarray(j, dtype=np.int64):
            if 1 <= jj <= len(self.funcs):
                rows.append(np.broadcast_to(np.asarray(self.funcs[jj - 1](x), dtype=float), x.shape))
            else:
                rows.append(np.zeros_like(x))
        return np.array(rows).reshape(len(rows), x.size)

    def phi_bound(self, j):
        grid = (np.arange(KAPPA_GRID) + 0.5) / KAPPA_GRID
        return np.max(np.abs(self.phi(j, grid)), axis=1)

    def kappa_tail(self, J):
        return 0.0


def make_field(family: str, c: float, sigma: float, b_family: str = "power",
               b_exponent: float = 3.0, jmax: int = 256) -> FieldSpec:
    """Factory for the built-in ``sine`` and ``haar-like`` families."""
    b = WeightFamily(b_family, b_exponent)
    if family == "sine":
        return SineField(c, sigma, b, jmax)
    if family == "haar-like":
        return HaarField(c, sigma, b, jmax)
    raise ValueError(f"unknown field family {family!r}")


def log_a(spec: FieldSpec, x, y, v: Sequence[int]) -> np.ndarray:
    """``sum_{j in v} y_j phi_j(x)`` for a batch of samples.

    ``y`` has shape ``(N, |v|)`` (or ``(|v|,)``); the result has shape ``(N, len(x))``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = y[None, :]
    v = list(v)
    if y.shape[1] != len(v):
        raise ValueError("y must have one column per index in v")
    if not v:
        return np.zeros((y.shape[0], x.size))
    return y @ spec.phi(np.asarray(v), x)


def eval_a(spec: FieldSpec, x, y, v: Sequence[int]) -> np.ndarray:
    """``a(x, y_v) = exp(sum_{j in v} y_j phi_j(x))``, shape ``(N, len(x))``."""
    z = log_a(spec, x, y, v)
    if np.any(np.abs(z) > EXP_LIMIT):
        raise ArithmeticError(f"|log a| exceeds {EXP_LIMIT}; coefficient would overflow")
    return np.exp(z)


@dataclass(frozen=True)
class KappaReport:
    grid_sup: float
    tail: float

    @property
    def value(self) -> float:
        return self.grid_sup + self.tail


def kappa(spec: FieldSpec, grid: int = KAPPA_GRID) -> KappaReport:
    """Grid supremum of ``sum_{j<=jmax} |phi_j|/b_j`` plus the analytic tail bound."""
    if grid < KAPPA_GRID:
        raise ValueError(f"grid must have at least {KAPPA_GRID} points")
    x = (np.arange(grid) + 0.5) / grid
    J = spec.jmax
    tail = spec.kappa_tail(J)
    acc = np.zeros(grid)
    for start in range(1, J + 1, 128):
        j = np.arange(start, min(J, start + 127) + 1)
        acc += np.sum(np.abs(spec.phi(j, x)) / spec.b_values(j)[:, None], axis=0)
    return KappaReport(float(np.max(acc)), float(tail))


def is_admissible(spec: FieldSpec, alpha: int) -> bool:
    """``kappa < ln 2 / alpha``; False when the tail bound is unavailable."""
    try:
        return kappa(spec).value < math.log(2.0) / alpha
    except TailBoundUnavailable:
        return False


@dataclass(frozen=True)
class Summability:
    converges: bool
    partial_sum: float
    total: float


def check_summability(spec: FieldSpec, pstar: float) -> Summability:
    """Whether ``sum_j b_j**pstar`` converges, with its partial sum up to ``jmax``."""
    if not 0 < pstar < 1:
        raise ValueError("p* must lie in (0, 1)")
    if isinstance(spec, FiniteField):
        s = float(np.sum(np.asarray(spec.weights) ** pstar))
        return Summability(True, s, s)
    b = spec.b
    partial = float(np.sum(b(np.arange(1, spec.jmax + 1)) ** pstar))
    ok = b.converges(pstar)
    total = partial + b.tail_power_sum(pstar, spec.jmax) if ok else math.inf
    return Summability(ok, partial, total)


def delta_kappa_alpha(kap: float, alpha: int) -> float:
    """Choice ``min(1 - 1e-6, 1.01 kappa alpha / ln 2)`` for the unspecified contraction."""
    return min(1.0 - 1e-6, 1.01 * kap * alpha / math.log(2.0))


def C_kappa_alpha(kap: float, alpha: int) -> float:
    """Geometric series ``sum_k delta**k`` with the chosen delta."""
    if not kap < math.log(2.0) / alpha:
        raise ValueError("kappa must be below ln 2 / alpha")
    return 1.0 / (1.0 - delta_kappa_alpha(kap, alpha))


def C_prime_kappa_alpha(spec: FieldSpec, kap: float, alpha: int) -> float:
    """``C^{1/2} exp(sum_j (kappa b_j)^2 + 2 kappa b_j / sqrt(2 pi))``."""
    if isinstance(spec, FiniteField):
        b = np.asarray(spec.weights)
        s1, s2 = float(b.sum()), float((b * b).sum())
    else:
        j = np.arange(1, spec.jmax + 1)
        bj = spec.b(j)
        s1 = float(bj.sum()) + spec.b.tail_power_sum(1.0, spec.jmax)
        s2 = float((bj * bj).sum()) + spec.b.tail_power_sum(2.0, spec.jmax)
    return math.sqrt(C_kappa_alpha(kap, alpha)) * math.exp(
        kap * kap * s2 + 2.0 * kap * s1 / math.sqrt(2.0 * math.pi)
    )
