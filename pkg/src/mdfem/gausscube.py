"""Higher-order QMC cubature over R^s with standard Gaussian weight.

An interlaced polynomial lattice rule on [0,1)^s is mapped affinely onto the box
[-T, T]^s and each node is weighted by the Gaussian density.  The module also
provides the reproducing kernel of the anchored Gaussian Sobolev space of
smoothness ``alpha`` and the explicit constants of the associated error bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy import integrate as spi
from scipy import special

from .gf2lattice import InterlacedRule, cached_rule, ctilde

SQRT2PI = math.sqrt(2.0 * math.pi)
OUTER_CUTOFF = 40.0


def rho(y):
    """Standard normal density."""
    return np.exp(-0.5 * np.asarray(y, dtype=float) ** 2) / SQRT2PI


def truncation_T(n: float, lam: float) -> float:
    """Box half-width ``T = 2 + 2 sqrt(lambda ln n)``."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if lam < 0.5:
        raise ValueError("lambda must be >= 1/2")
    return 2.0 + 2.0 * math.sqrt(lam * math.log(n))


@dataclass(frozen=True)
class KernelParams:
    alpha: int

    def __post_init__(self):
        if int(self.alpha) != self.alpha or self.alpha < 1:
            raise ValueError("alpha must be an integer >= 1")


@lru_cache(maxsize=None)
def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _panel_nodes(hi: float, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes on [0, hi], panel width <= min(1/2, 1/hi)."""
    width = min(0.5, 1.0 / hi) if hi > 0 else 0.5
    npan = max(1, math.ceil(hi / width))
    x, w = _gauss_legendre(order)
    edges = np.linspace(0.0, hi, npan + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _scaled_integral(ax: float, ay: float, alpha: int, shift: float = 0.0) -> float:
    """``int_0^min (ax-t)^(a-1) (ay-t)^(a-1) / ((a-1)!)^2 * sqrt(2 pi) e^(t^2/2 - shift) dt``."""
    hi = min(ax, ay)
    if hi <= 0.0:
        return 0.0
    t, w = _panel_nodes(hi, 2 * alpha + 8)
    fac = math.factorial(alpha - 1) ** 2
    vals = (ax - t) ** (alpha - 1) * (ay - t) ** (alpha - 1) * np.exp(0.5 * t * t - shift)
    return float(SQRT2PI * np.sum(w * vals) / fac)


def kernel_eval(p: KernelParams | int, x: float, y: float) -> float:
    """Reproducing kernel ``K_{alpha,0,rho}(x, y)`` of the anchored Gaussian Sobolev space."""
    alpha = p.alpha if isinstance(p, KernelParams) else KernelParams(int(p)).alpha
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ValueError("kernel arguments must be finite")
    val = 0.0
    xy = x * y
    for tau in range(1, alpha):
        val += xy**tau / math.factorial(tau) ** 2
    if xy > 0:
        val += _scaled_integral(abs(x), abs(y), alpha)
    return val


def _diag_times_rho2(y: float, alpha: int) -> float:
    """``K(y, y) rho(y)^2`` evaluated without overflow."""
    y = abs(y)
    r2 = math.exp(-y * y) / (2.0 * math.pi)
    poly = sum(y ** (2 * tau) / math.factorial(tau) ** 2 for tau in range(1, alpha))
    # the e^{t^2/2} factor is combined with rho(y)^2 = e^{-y^2}/(2 pi)
    integral = _scaled_integral(y, y, alpha, shift=y * y) / (2.0 * math.pi)
    return poly * r2 + integral


@lru_cache(maxsize=None)
def constant_M(alpha: int) -> float:
    """``M = int_R sqrt(K(y,y)) rho(y) dy`` by adaptive quadrature on |y| <= 40."""
    KernelParams(alpha)
    val, err = spi.quad(
        lambda y: math.sqrt(_diag_times_rho2(y, alpha)),
        0.0,
        OUTER_CUTOFF,
        epsabs=1e-13,
        epsrel=1e-12,
        limit=400,
    )
    if err > 1e-10:
        raise ArithmeticError(f"quadrature for M did not converge (err={err:g})")
    return 2.0 * val


def constant_M_bound(alpha: int) -> float:
    """Closed-form upper bound for ``M`` used in the analysis (maximal at alpha = 3)."""
    KernelParams(alpha)
    poly = sum(1.0 / (2.0 ** (r / 2.0) * math.gamma(1.0 + r / 2.0)) for r in range(1, alpha))
    tail = (
        2.0 ** (alpha + 0.25)
        * math.gamma(alpha / 2.0 + 0.25)
        / (math.factorial(alpha - 1) * math.sqrt(2 * alpha - 1) * math.pi**0.25)
    )
    return poly + tail


def constant_C1(alpha: int, bessel_arg: float = 0.5) -> float:
    """Embedding constant; ``bessel_arg`` selects I0(1/2) (default) or I0(1/4)."""
    inner = alpha * (1 + alpha / 2.0) * math.gamma(2 * alpha) * special.i0(bessel_arg) / SQRT2PI
    return math.factorial(alpha) * 2.0 ** (3 * alpha) * math.sqrt(inner)


def constant_C3(alpha: int, s: int) -> float:
    M = constant_M(alpha)
    return 2 * s * M ** (s - 1) * math.sqrt(alpha / 2.0) * 2 * math.e / (2 * math.pi) ** 0.25


def constant_C4(alpha: int, lam: float, s: int) -> float:
    return 2.0**s * ctilde(alpha, lam, s) * constant_C1(alpha) ** s


def c_diamond(alpha: int) -> tuple[float, float]:
    """Numeric value and closed-form bound of the Hermite moment constant.

    The value is ``max int H_tau(y)^2 |y|^eta rho(y) dy`` over tau in {0..alpha} and
    eta in {0, 2 alpha - 1} (the integral is log-convex in eta, so the maximum
    over the interval is attained at an endpoint), with normalised probabilists'
    Hermite polynomials.
    """
    best = 0.0
    for tau in range(alpha + 1):
        he = special.hermitenorm(tau)
        norm = math.factorial(tau)
        for eta in (0.0, 2.0 * alpha - 1.0):
            v, _ = spi.quad(
                lambda y: he(y) ** 2 / norm * abs(y) ** eta * math.exp(-0.5 * y * y) / SQRT2PI,
                -OUTER_CUTOFF,
                OUTER_CUTOFF,
                points=[0.0],
                limit=200,
            )
            best = max(best, v)
    bound = (
        math.factorial(alpha) * (1 + alpha / 2.0) * 4.0**alpha / SQRT2PI
        * math.gamma(2 * alpha) * special.i0(0.5)
    )
    return best, float(bound)


@dataclass(frozen=True)
class BoundConstants:
    M: float
    C1: float
    C1_quarter: float
    C3: float
    C4: float
    Ctilde: float
    C_full: float


def bound_constants(alpha: int, lam: float, s: int) -> BoundConstants:
    """All explicit constants of the Gaussian cubature error bound."""
    if not 1 <= lam < alpha:
        raise ValueError("lambda must lie in [1, alpha)")
    if s < 1:
        raise ValueError("s must be >= 1")
    c3 = constant_C3(alpha, s)
    c4 = constant_C4(alpha, lam, s)
    full = max(
        c3 / (2 * math.sqrt(lam * math.log(2))),
        c4 * (2 / math.sqrt(math.log(2)) + 2 * math.sqrt(lam)) ** ((alpha + 0.5) * s),
    )
    return BoundConstants(
        M=constant_M(alpha),
        C1=constant_C1(alpha, 0.5),
        C1_quarter=constant_C1(alpha, 0.25),
        C3=c3,
        C4=c4,
        Ctilde=ctilde(alpha, lam, s),
        C_full=full,
    )


@dataclass(frozen=True)
class GaussCubature:
    """Interlaced lattice rule mapped to [-T, T]^s with Gaussian weights."""

    rule: InterlacedRule
    lam: float
    T: float

    def __post_init__(self):
        if not 1 <= self.lam < self.rule.alpha:
            raise ValueError("lambda must lie in [1, alpha)")
        if self.T < 1.0 / (2.0 * math.sqrt(2.0)):
            raise ValueError("T must be >= 1/(2 sqrt 2)")

    @property
    def s(self) -> int:
        return self.rule.s

    @property
    def n(self) -> int:
        return self.rule.n

    def nodes(self) -> np.ndarray:
        return 2.0 * self.T * self.rule.points() - self.T

    def weights(self, nodes: np.ndarray | None = None) -> np.ndarray:
        z = self.nodes() if nodes is None else nodes
        return (2.0 * self.T) ** self.s / self.n * np.prod(rho(z), axis=1)


def make_cubature(m: int, s: int, alpha: int, lam: float, T: float | None = None) -> GaussCubature:
    """CBC rule with ``2**m`` points and the default truncation ``T`` unless given."""
    rule = cached_rule(m, s, alpha)
    if T is None:
        T = truncation_T(rule.n, lam)
    return GaussCubature(rule, lam, T)


def integrate(c: GaussCubature, F: Callable[[np.ndarray], np.ndarray]) -> float:
    """Apply the cubature to ``F``, which maps an ``(n, s)`` node array to ``n`` values."""
    z = c.nodes()
    vals = np.asarray(F(z), dtype=float).reshape(-1)
    if vals.shape[0] != z.shape[0]:
        raise ValueError("integrand must return one value per node")
    if not np.all(np.isfinite(vals)):
        raise ArithmeticError("non-finite integrand value at a cubature node")
    return float(np.sum(c.weights(z) * vals))


def error_bound(c: GaussCubature, norm: float) -> float:
    """A-priori bound ``C (ln n)^((alpha/2+1/4) s) n^(-lambda) * norm``."""
    if c.n < 2:
        raise ValueError("n must be >= 2")
    if norm == 0:
        return 0.0
    a = c.rule.alpha
    C = bound_constants(a, c.lam, c.s).C_full
    return C * math.log(c.n) ** ((a / 2 + 0.25) * c.s) * c.n ** (-c.lam) * norm


def anchored_norm_1d(derivs_at_zero: Sequence[float], top: Callable[[float], float], alpha: int) -> float:
    """Norm in the anchored Gaussian Sobolev space of a univariate function.

    ``derivs_at_zero`` lists ``f^(tau)(0)`` for tau = 1..alpha-1 and ``top`` is
    the derivative of order ``alpha``; the norm squared is the sum of squares of
    the former plus ``int |f^(alpha)|^2 rho``.
    """
    if len(derivs_at_zero) != alpha - 1:
        raise ValueError("need alpha-1 derivative values at zero")
    v, _ = spi.quad(lambda y: top(y) ** 2 * math.exp(-0.5 * y * y) / SQRT2PI,
                    -OUTER_CUTOFF, OUTER_CUTOFF, points=[0.0], limit=400)
    return math.sqrt(sum(d * d for d in derivs_at_zero) + v)
