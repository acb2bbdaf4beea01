"""Rate selection and Lagrange allocation of cubature sizes and mesh widths."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .gausscube import bound_constants
from .gf2lattice import MAX_M
from .mdm import ActiveSet

MAX_ELEMENTS = 10**7


@dataclass(frozen=True)
class RateParams:
    pstar: float
    tau: float
    dprime: float
    lam: float
    alpha: int
    alpha1: float


def derive_rates(pstar: float, tau: float, dprime: float) -> RateParams:
    """``lambda = (1-p*)/(p*(1+d'/tau))``, ``alpha = floor(lambda)+1``, ``alpha1 = alpha/2+1/4``.

    Only the higher-order branch ``lambda >= 1`` is supported.
    """
    if not 0 < pstar < 1:
        raise ValueError("p* must lie in (0, 1)")
    if tau <= 0 or dprime <= 0:
        raise ValueError("tau and d' must be positive")
    lam = (1.0 - pstar) / (pstar * (1.0 + dprime / tau))
    if abs(lam - 1.0) < 1e-12:
        lam = 1.0
    if lam < 1.0:
        raise ValueError(
            f"p* = {pstar:g} gives lambda = {lam:.6g} < 1; only the higher-order branch "
            f"p* <= 1/(2 + d'/tau) = {1 / (2 + dprime / tau):.6g} is supported"
        )
    alpha = math.floor(lam) + 1
    return RateParams(pstar, tau, dprime, lam, alpha, alpha / 2.0 + 0.25)


@lru_cache(maxsize=None)
def _c_theoretical(alpha: int, lam: float, s: int) -> float:
    return 1.0 if s == 0 else bound_constants(alpha, lam, s).C_full


def pounds(k: int) -> float:
    """Cost factor ``2^k k`` of a subset of size ``k``, with 1 for the empty set."""
    return 1.0 if k == 0 else 2.0**k * k


@dataclass(frozen=True)
class AllocEntry:
    u: tuple[int, ...]
    a: float
    k: float
    n: int
    h: float
    h_cont: float
    T: float

    @property
    def elements(self) -> int:
        return round(1.0 / self.h)


@dataclass(frozen=True)
class Allocation:
    entries: tuple[AllocEntry, ...]
    rates: RateParams
    epsilon: float
    xi: float
    K_eps: float
    mode: str
    c: float

    def constraint_residual(self) -> float:
        """``(1 + lambda d'/tau) sum a_u k_u^-lambda`` (equals eps/2 before rounding)."""
        r = self.rates
        return (1 + r.lam * r.dprime / r.tau) * math.fsum(e.a * e.k ** (-r.lam) for e in self.entries)

    def to_csv(self) -> str:
        lines = ["u;n_u;h_u;T_u;a_u"]
        for e in self.entries:
            lines.append(f"{','.join(map(str, e.u))};{e.n};{e.h:.17g};{e.T:.17g};{e.a:.17g}")
        return "\n".join(lines) + "\n"


def a_coefficient(gamma_u: float, size: int, r: RateParams, mode: str, c: float) -> float:
    """``gamma_u 2^lambda C_{alpha,lambda,|u|} |u|^{alpha1 |u|}`` with ``0^0 = 1``."""
    if mode == "theoretical":
        C = _c_theoretical(r.alpha, r.lam, size)
    elif mode == "practical":
        C = c**size
    else:
        raise ValueError(f"unknown constants mode {mode!r}")
    pw = 1.0 if size == 0 else float(size) ** (r.alpha1 * size)
    return gamma_u * 2.0**r.lam * C * pw


def _pow2_floor(k: float) -> int:
    base = max(1, math.floor(k))
    return 1 << (base.bit_length() - 1)


def allocate(r: RateParams, aset: ActiveSet, epsilon: float, mode: str = "practical",
             c: float = 1.0, min_elements: int = 2) -> Allocation:
    """Cost-minimising ``(n_u, h_u)`` subject to the error budget ``eps/2``.

    Stationarity gives ``2^|u| h_u^tau = (lambda d'/tau) a_u k_u^-lambda`` and
    ``k_u = (xi beta_u)^e`` with ``e = tau/(tau + lambda (tau + d'))``; the
    multiplier ``xi`` then follows from the saturated constraint.  ``n_u`` is the
    largest power of two not above ``floor(k_u)`` (1 for the empty set) and
    ``h_u`` is rounded down to the reciprocal of an integer.
    """
    if len(aset) == 0:
        raise ValueError("active set is empty")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    lam, tau, dp = r.lam, r.tau, r.dprime
    sizes = np.array([len(u) for u in aset.subsets])
    a = np.array([a_coefficient(aset.gamma(i), int(k), r, mode, c) for i, k in enumerate(sizes)])
    two_u = 2.0**sizes
    L = np.array([pounds(int(k)) for k in sizes])
    e = tau / (tau + lam * (tau + dp))
    # k_u = (xi * beta_u)^e
    beta = (tau / dp) * (two_u / L) * (dp * lam * a / (tau * two_u)) ** ((tau + dp) / tau)
    S = math.fsum(a * beta ** (-lam * e))
    xi = ((2.0 / epsilon) * (1.0 + lam * dp / tau) * S) ** (1.0 / (lam * e))
    k = (xi * beta) ** e
    h_cont = (lam * dp / tau * a / two_u) ** (1.0 / tau) * k ** (-lam / tau)
    K_eps = math.fsum((a**tau * 2.0 ** (lam * sizes * dp) * L ** (lam * tau)) ** (1.0 / (tau + lam * (tau + dp))))
    entries = []
    for i, u in enumerate(aset.subsets):
        n = 1 if not u else _pow2_floor(k[i])
        if n > (1 << MAX_M):
            raise RuntimeError(f"allocation needs n_u = {n} > 2^{MAX_M}; epsilon too small")
        elems = max(min_elements, math.ceil(1.0 / h_cont[i] - 1e-9))
        if elems > MAX_ELEMENTS:
            raise RuntimeError("allocation needs more mesh elements than the guard allows")
        T = 2.0 + 2.0 * math.sqrt(lam * math.log(n)) if n >= 2 else float("nan")
        entries.append(AllocEntry(u, float(a[i]), float(k[i]), n, 1.0 / elems, float(h_cont[i]), T))
    return Allocation(tuple(entries), r, epsilon, float(xi), K_eps, mode, c)


def closed_form_B(r: RateParams) -> float:
    """Closed-form constant ``B`` of the allocation formulas."""
    lam, tau, dp = r.lam, r.tau, r.dprime
    return (dp**dp * lam ** (tau + dp) / tau**dp) ** (1.0 / (tau + lam * (tau + dp)))


def cost_of(alloc: Allocation) -> float:
    """Model cost ``sum_u n_u h_u^{-d'} pounds_u``."""
    dp = alloc.rates.dprime
    return math.fsum(e.n * e.h ** (-dp) * pounds(len(e.u)) for e in alloc.entries)


@dataclass(frozen=True)
class Exponents:
    a_MDFEM: float
    a_QMCFEM: float
    higher_order: bool
    qmcfem_low_branch: bool


def exponents(pstar: float, tau: float, dprime: float) -> Exponents:
    """Cost exponents of MDFEM and of single-level QMCFEM."""
    if not 0 < pstar < 1:
        raise ValueError("p* must lie in (0, 1)")
    ratio = dprime / tau
    a_md = (pstar + ratio) / (1.0 - pstar)
    inner = max(2 * pstar / (4 - pstar), ratio)
    low = pstar <= 2.0 / 3.0
    a_q = 1.0 + inner if low else 4 * pstar / (2 + pstar) + inner
    return Exponents(a_md, a_q, pstar <= 1.0 / (2.0 + ratio), low)
