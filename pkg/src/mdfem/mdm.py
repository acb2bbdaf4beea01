"""Anchored decomposition, product weights and active-set construction."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterator, Protocol, Sequence

import numpy as np

MAX_CANDIDATES = 10**7
SQRT2 = math.sqrt(2.0)

IndexSet = tuple[int, ...]


def gray_code_subsets(u: Sequence[int]) -> Iterator[tuple[IndexSet, int]]:
    """Yield ``(v, sign)`` for every ``v`` subset of ``u`` in reflected Gray-code order.

    Consecutive subsets differ in exactly one element and ``sign`` is
    ``(-1)**(|u| - |v|)``.  The first subset is the empty set.
    """
    u = tuple(u)
    k = len(u)
    for i in range(1 << k):
        g = i ^ (i >> 1)
        v = tuple(u[b] for b in range(k) if (g >> b) & 1)
        yield v, (-1) ** (k - len(v))


def anchored_terms(F: Callable[[np.ndarray], float], u: Sequence[int], y_u: Sequence[float],
                   dim: int | None = None) -> float:
    """Anchored decomposition term ``F_u(y_u) = sum_v (-1)^{|u|-|v|} F(y_v, 0)``.

    ``F`` receives a zero-padded vector whose entry ``j-1`` holds coordinate ``j``.
    """
    u = tuple(u)
    if len(y_u) != len(u):
        raise ValueError("y_u must have one value per index in u")
    D = dim if dim is not None else (max(u) if u else 0)
    pos = {j: y for j, y in zip(u, y_u)}
    total = 0.0
    for v, sign in gray_code_subsets(u):
        z = np.zeros(D)
        for j in v:
            z[j - 1] = pos[j]
        total += sign * F(z)
    return total


class BFamily(Protocol):
    def __call__(self, j) -> np.ndarray: ...

    def tail_power_sum(self, e: float, J: int) -> float: ...


@dataclass(frozen=True)
class ScaledGeometric:
    """``b_j = scale * ratio**j``."""

    scale: float
    ratio: float

    def __call__(self, j):
        return self.scale * self.ratio ** np.asarray(j, dtype=float)

    def tail_power_sum(self, e, J):
        q = self.ratio**e
        return self.scale**e * q ** (J + 1) / (1.0 - q)


@dataclass(frozen=True)
class FiniteB:
    """Finitely many nonincreasing weights; zero beyond the list."""

    values: tuple[float, ...]

    def __post_init__(self):
        v = self.values
        if any(a < b for a, b in zip(v, v[1:])):
            raise ValueError("finite weights must be nonincreasing")

    def __call__(self, j):
        j = np.asarray(j, dtype=np.int64)
        ext = np.asarray(self.values + (0.0,), dtype=float)
        return ext[np.where(j <= len(self.values), j - 1, len(self.values))]

    def tail_power_sum(self, e, J):
        return float(sum(b**e for b in self.values[J:]))


@dataclass(frozen=True)
class Weights:
    """Product weights ``gamma_j = sqrt(2) b_j`` together with the kernel constant ``M``.

    ``b`` must be nonincreasing in ``j`` so that index order is also the order
    of decreasing factor ``gamma_j M``.
    """

    b: BFamily
    M: float

    def factor(self, j) -> np.ndarray:
        """``gamma_j M``."""
        return SQRT2 * self.M * self.b(j)

    def factor_tail(self, e: float, J: int) -> float:
        """``sum_{j>J} (gamma_j M)**e``."""
        return (SQRT2 * self.M) ** e * self.b.tail_power_sum(e, J)


def product_tail(w: Weights, pstar: float, jdirect: int = 64) -> float:
    """``sum_{|v| < inf} (gamma_v M_v)**p* = prod_j (1 + (gamma_j M)**p*)``.

    The leading factors are multiplied out directly.  The remaining log-sum is
    expanded as ``sum_k (-1)^{k+1}/k sum_{j>J} x_j**k`` whose inner sums have
    closed forms, so slowly decaying weights are summed to machine precision.
    """
    if not 0 < pstar <= 1:
        raise ValueError("p* must lie in (0, 1]")
    if not math.isfinite(w.factor_tail(pstar, 0)):
        raise ValueError("sum of (gamma_j M)^p* diverges")
    J = jdirect
    while float(w.factor(J + 1)) ** pstar > 0.5:
        J *= 2
        if J > MAX_CANDIDATES:
            raise ValueError("weights decay too slowly")
    x = w.factor(np.arange(1, J + 1)) ** pstar
    log_s = float(np.sum(np.log1p(x)))
    for k in range(1, 200):
        term = w.factor_tail(k * pstar, J) / k
        log_s += term if k % 2 else -term
        if term < 1e-17 * max(log_s, 1.0):
            break
    return math.exp(log_s)


@dataclass(frozen=True)
class ActiveSet:
    """Subsets ``u`` with ``gamma_u M_u`` above the threshold, sorted by size then lexicographically."""

    subsets: tuple[IndexSet, ...]
    values: tuple[float, ...]
    epsilon: float
    pstar: float
    denom_sum: float
    threshold: float
    M: float = 1.0

    def gamma(self, k: int) -> float:
        """``gamma_u`` of the ``k``-th subset (the stored value divided by ``M**|u|``)."""
        return self.values[k] / self.M ** len(self.subsets[k])

    def __len__(self) -> int:
        return len(self.subsets)

    def items(self):
        return zip(self.subsets, self.values)

    def to_csv(self) -> str:
        lines = ["u;gamma_u_M_u"]
        for u, g in self.items():
            lines.append(f"{','.join(map(str, u))};{g:.17g}")
        return "\n".join(lines) + "\n"


def active_threshold(epsilon: float, pstar: float, denom: float) -> float:
    return (epsilon / 2.0 / denom) ** (1.0 / (1.0 - pstar))


def build_active_set(w: Weights, epsilon: float, pstar: float) -> ActiveSet:
    """Enumerate all ``u`` with ``gamma_u M_u > ((eps/2) / sum_v (gamma_v M_v)^p*)^(1/(1-p*))``.

    Depth-first over indices in order of decreasing factor.  Factors above one
    are handled by bounding the largest possible boost from the indices that
    remain, so pruning stays exact.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if not 0 < pstar < 1:
        raise ValueError("p* must lie in (0, 1)")
    denom = product_tail(w, pstar)
    t = active_threshold(epsilon, pstar, denom)
    found: dict[IndexSet, float] = {(): 1.0}
    # every product is at most one factor times the boost of all factors > 1
    boost = 1.0
    j = 1
    while float(w.factor(j)) > 1.0:
        boost *= float(w.factor(j))
        j += 1
        if j > MAX_CANDIDATES:
            raise ValueError("infinitely many factors exceed one")
    J = 0
    while float(w.factor(J + 1)) * boost > t:
        J += 1
        if J > MAX_CANDIDATES:
            raise RuntimeError("active-set dimension cap exceeds the enumeration guard")
    c = w.factor(np.arange(1, J + 1)).astype(float)
    # B[i]: largest boost obtainable from indices after i
    B = np.ones(J)
    for i in range(J - 2, -1, -1):
        B[i] = B[i + 1] * max(c[i + 1], 1.0)
    visited = 0
    stack: list[tuple[int, float, IndexSet]] = [(0, 1.0, ())]
    while stack:
        start, P, u = stack.pop()
        for i in range(start, J):
            q = P * c[i]
            if q * B[i] <= t:
                break
            visited += 1
            if visited > MAX_CANDIDATES:
                raise RuntimeError("active-set enumeration exceeded 10^7 candidates")
            v = u + (i + 1,)
            if q > t:
                found[v] = q
            stack.append((i + 1, q, v))
    keys = sorted(found, key=lambda u: (len(u), u))
    aset = ActiveSet(tuple(keys), tuple(found[k] for k in keys), epsilon, pstar, denom, t, w.M)
    if float(w.factor(1)) <= 1.0:
        _assert_downward_closed(aset)
    return aset


def _assert_downward_closed(aset: ActiveSet) -> None:
    members = set(aset.subsets)
    for u in aset.subsets:
        for k in range(len(u)):
            if u[:k] + u[k + 1:] not in members:
                raise AssertionError(f"active set not downward closed at {u}")


@dataclass(frozen=True)
class SuperpositionStats:
    count: int
    max_cardinality: int


def superposition_stats(aset: ActiveSet) -> SuperpositionStats:
    return SuperpositionStats(len(aset.subsets), max((len(u) for u in aset.subsets), default=0))


def cardinality_bound(epsilon: float, pstar: float, denom: float) -> float:
    """Upper bound ``(2/eps)^{p*/(1-p*)} denom^{1/(1-p*)}`` on the active-set size."""
    return (2.0 / epsilon) ** (pstar / (1.0 - pstar)) * denom ** (1.0 / (1.0 - pstar))


def truncation_certificate(w: Weights, aset: ActiveSet) -> float:
    """``sum_{u not in U} gamma_u M_u`` as the full product minus the in-set sum."""
    total = product_tail(w, 1.0)
    return max(0.0, total - math.fsum(aset.values))
