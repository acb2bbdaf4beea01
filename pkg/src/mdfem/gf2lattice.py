"""Polynomial lattice rules over GF(2), digit interlacing and CBC construction.

Polynomials over GF(2) are bit-packed into Python integers: bit ``i`` holds the
coefficient of ``x**i``.  Point sets are kept as exact dyadic rationals, i.e. an
integer numerator array together with the number of binary digits, so that
Walsh sums and dual-lattice checks can be done in exact integer arithmetic.
Conversion to floating point happens only when a cubature rule is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_DEGREE = 63
MAX_M = 20
MAX_BITS = 63


class Gf2OverflowError(OverflowError):
    """Raised when a GF(2) polynomial exceeds the supported degree bound."""


def _check(bits: int) -> int:
    if bits < 0:
        raise ValueError("polynomial bitmask must be nonnegative")
    if bits.bit_length() - 1 > MAX_DEGREE:
        raise Gf2OverflowError(f"degree {bits.bit_length() - 1} exceeds {MAX_DEGREE}")
    return bits


def _mul(a: int, b: int) -> int:
    if a < b:
        a, b = b, a
    c = 0
    while b:
        if b & 1:
            c ^= a
        a <<= 1
        b >>= 1
    return c


def _divmod(a: int, b: int) -> tuple[int, int]:
    if b == 0:
        raise ZeroDivisionError("division by the zero polynomial")
    db = b.bit_length() - 1
    q = 0
    while a and a.bit_length() - 1 >= db:
        shift = a.bit_length() - 1 - db
        q ^= 1 << shift
        a ^= b << shift
    return q, a


def _mod(a: int, b: int) -> int:
    return _divmod(a, b)[1]


def _mulmod(a: int, b: int, p: int) -> int:
    return _mod(_mul(a, b), p)


def _gcd(a: int, b: int) -> int:
    while b:
        a, b = b, _mod(a, b)
    return a


@dataclass(frozen=True, order=True)
class Gf2Poly:
    """Polynomial over GF(2) stored as a bitmask, degree at most 63."""

    bits: int = 0

    def __post_init__(self):
        _check(self.bits)

    @classmethod
    def from_coeffs(cls, coeffs: Iterable[int]) -> "Gf2Poly":
        """Build from coefficients listed by increasing power."""
        bits = 0
        for i, c in enumerate(coeffs):
            if c & 1:
                bits |= 1 << i
        return cls(bits)

    @property
    def degree(self) -> int:
        """Degree, with ``-1`` for the zero polynomial."""
        return self.bits.bit_length() - 1

    def is_zero(self) -> bool:
        return self.bits == 0

    def __add__(self, other: "Gf2Poly") -> "Gf2Poly":
        return Gf2Poly(self.bits ^ other.bits)

    __sub__ = __add__

    def __mul__(self, other: "Gf2Poly") -> "Gf2Poly":
        if self.bits and other.bits and self.degree + other.degree > MAX_DEGREE:
            raise Gf2OverflowError(
                f"product degree {self.degree + other.degree} exceeds {MAX_DEGREE}"
            )
        return Gf2Poly(_mul(self.bits, other.bits))

    def __divmod__(self, other: "Gf2Poly") -> tuple["Gf2Poly", "Gf2Poly"]:
        q, r = _divmod(self.bits, other.bits)
        return Gf2Poly(q), Gf2Poly(r)

    def __floordiv__(self, other: "Gf2Poly") -> "Gf2Poly":
        return divmod(self, other)[0]

    def __mod__(self, other: "Gf2Poly") -> "Gf2Poly":
        return divmod(self, other)[1]

    def gcd(self, other: "Gf2Poly") -> "Gf2Poly":
        return Gf2Poly(_gcd(self.bits, other.bits))

    def is_irreducible(self) -> bool:
        return is_irreducible(self.bits)

    def __repr__(self) -> str:
        if self.bits == 0:
            return "Gf2Poly(0)"
        terms = []
        for i in range(self.degree, -1, -1):
            if (self.bits >> i) & 1:
                terms.append("1" if i == 0 else ("x" if i == 1 else f"x^{i}"))
        return f"Gf2Poly({' + '.join(terms)})"


def is_irreducible(p: int) -> bool:
    """Ben-Or irreducibility test for a bitmask polynomial."""
    n = p.bit_length() - 1
    if n < 1:
        return False
    if n == 1:
        return True
    if not p & 1:
        return False
    x = 0b10
    t = x
    for _ in range(n // 2):
        t = _mulmod(t, t, p)
        if _gcd(p, t ^ x) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def smallest_irreducible(m: int) -> int:
    """Smallest bitmask irreducible polynomial of degree ``m`` with ``p(0) = 1``."""
    if not 1 <= m <= MAX_DEGREE:
        raise ValueError(f"degree must be in [1, {MAX_DEGREE}]")
    for p in range((1 << m) | 1, 1 << (m + 1), 2):
        if is_irreducible(p):
            return p
    raise AssertionError("unreachable: irreducibles exist in every degree")


def laurent_digits(num: int, p: int, count: int) -> list[int]:
    """Coefficients ``w_1..w_count`` of ``x^-i`` in the Laurent expansion of num/p."""
    if p == 0:
        raise ZeroDivisionError("division by the zero polynomial")
    dp = p.bit_length() - 1
    r = _mod(num, p)
    out = []
    for _ in range(count):
        r <<= 1
        if (r >> dp) & 1:
            out.append(1)
            r ^= p
        else:
            out.append(0)
    return out


def theta_m(num: int, p: int, m: int) -> int:
    """Numerator over ``2**m`` of the truncated Laurent map of ``num/p``.

    Only the digits ``w_1..w_m`` (negative powers of ``x``) contribute, so the
    polynomial part of ``num/p`` is discarded.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    v = 0
    for w in laurent_digits(num, p, m):
        v = (v << 1) | w
    return v


@dataclass(frozen=True)
class LatticeConfig:
    """Polynomial lattice with ``2**m`` points in ``d = len(gen)`` dimensions."""

    m: int
    modulus: int
    gen: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "gen", tuple(int(q) for q in self.gen))
        if not 1 <= self.m <= MAX_M:
            raise ValueError(f"m must be in [1, {MAX_M}]")
        if self.modulus.bit_length() - 1 != self.m:
            raise ValueError("modulus degree must equal m")
        if not is_irreducible(self.modulus) or not self.modulus & 1:
            raise ValueError("modulus must be irreducible with nonzero constant term")
        for q in self.gen:
            if q < 0 or q >= (1 << self.m):
                raise ValueError(f"generator {q:#x} not in G_m (degree < {self.m})")

    @property
    def d(self) -> int:
        return len(self.gen)

    @property
    def n(self) -> int:
        return 1 << self.m


def _column_ints(q: int, p: int, m: int) -> np.ndarray:
    """Coordinate numerators of the points with index ``2**l``, l = 0..m-1."""
    return np.array([theta_m(_mul(1 << l, q), p, m) for l in range(m)], dtype=np.uint64)


def _span(cols: np.ndarray) -> np.ndarray:
    """All XOR combinations of ``cols`` ordered by the binary index k."""
    out = np.zeros(1, dtype=np.uint64)
    for c in cols:
        out = np.concatenate([out, out ^ c])
    return out


def lattice_points(cfg: LatticeConfig) -> np.ndarray:
    """Integer numerators (over ``2**m``) of the lattice points, shape ``(n, d)``.

    Row ``k`` holds the point generated by the polynomial whose coefficients are
    the binary digits of ``k``; the map ``k -> point`` is GF(2)-linear, so the
    full set is built by XOR-doubling from the ``m`` basis columns.
    """
    pts = np.empty((cfg.n, cfg.d), dtype=np.uint64)
    for j, q in enumerate(cfg.gen):
        pts[:, j] = _span(_column_ints(q, cfg.modulus, cfg.m))
    return pts


def interlace(values: np.ndarray, bits: int, alpha: int) -> np.ndarray:
    """Interleave digits of ``alpha`` consecutive columns into one column.

    ``values`` has shape ``(n, alpha*s)`` holding numerators over ``2**bits``;
    the result has shape ``(n, s)`` with numerators over ``2**(alpha*bits)``.
    Digit ``i`` of input column ``j`` (1-based) lands on output digit
    ``alpha*(i-1) + j``.
    """
    values = np.asarray(values, dtype=np.uint64)
    if values.ndim == 1:
        values = values[None, :]
    n, d = values.shape
    if d % alpha:
        raise ValueError(f"number of columns {d} is not a multiple of alpha={alpha}")
    total = alpha * bits
    if total > MAX_BITS:
        raise ValueError(f"interlaced digits {total} exceed {MAX_BITS}")
    s = d // alpha
    out = np.zeros((n, s), dtype=np.uint64)
    one = np.uint64(1)
    for blk in range(s):
        acc = np.zeros(n, dtype=np.uint64)
        for j in range(1, alpha + 1):
            col = values[:, blk * alpha + j - 1]
            for i in range(1, bits + 1):
                digit = (col >> np.uint64(bits - i)) & one
                acc |= digit << np.uint64(total - (alpha * (i - 1) + j))
        out[:, blk] = acc
    return out


@dataclass(frozen=True)
class InterlacedRule:
    """Interlaced polynomial lattice rule of order ``alpha`` in ``s`` dimensions."""

    lattice: LatticeConfig
    alpha: int
    quality: float = field(default=float("nan"), compare=False)

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("alpha must be >= 1")
        if self.lattice.d % self.alpha:
            raise ValueError("lattice dimension must be a multiple of alpha")
        if self.alpha * self.lattice.m > MAX_BITS:
            raise ValueError("alpha*m exceeds the 63-bit budget")

    @property
    def s(self) -> int:
        return self.lattice.d // self.alpha

    @property
    def m(self) -> int:
        return self.lattice.m

    @property
    def n(self) -> int:
        return self.lattice.n

    @property
    def bits(self) -> int:
        return self.alpha * self.lattice.m

    def point_numerators(self) -> np.ndarray:
        """Exact numerators over ``2**(alpha*m)``, shape ``(n, s)``."""
        return interlace(lattice_points(self.lattice), self.lattice.m, self.alpha)

    def points(self) -> np.ndarray:
        """Points in ``[0, 1)^s`` as float64."""
        return self.point_numerators().astype(np.float64) * 2.0 ** (-self.bits)

    def to_text(self) -> str:
        return rule_to_text(self)


def interlace_points(rule: InterlacedRule) -> np.ndarray:
    """Exact interlaced point set of ``rule`` (numerators over ``2**(alpha*m)``)."""
    return rule.point_numerators()


def mu_alpha(k: int, alpha: int) -> int:
    """Sum of the ``alpha`` largest 1-based digit positions of ``k``."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    total = 0
    count = 0
    while k and count < alpha:
        pos = k.bit_length()
        total += pos
        k ^= 1 << (pos - 1)
        count += 1
    return total


def walsh(k: int, x_num, bits: int):
    """Walsh function ``wal_k`` at dyadic points ``x_num / 2**bits`` (values +-1)."""
    x = np.asarray(x_num, dtype=np.uint64)
    parity = np.zeros(x.shape, dtype=np.uint64)
    one = np.uint64(1)
    i = 0
    while k:
        if k & 1:
            if i < bits:
                parity ^= (x >> np.uint64(bits - 1 - i)) & one
        k >>= 1
        i += 1
    return 1 - 2 * parity.astype(np.int64)


def truncate(k: int, m: int) -> int:
    return k & ((1 << m) - 1)


def dual_membership(cfg: LatticeConfig, k: Sequence[int]) -> bool:
    """True iff ``sum_j tr_m(k_j) q_j == 0 (mod p)``."""
    if len(k) != cfg.d:
        raise ValueError("k must have one entry per lattice dimension")
    acc = 0
    for kj, qj in zip(k, cfg.gen):
        acc ^= _mul(truncate(int(kj), cfg.m), qj)
    return _mod(acc, cfg.modulus) == 0


def walsh_kernel_table(alpha: int, bits: int) -> np.ndarray:
    """Values of ``sum_{k>=1} 2**(-alpha*mu_1(k)) wal_k(x)`` on the grid ``x = v/2**bits``.

    With ``r = 2**(1-alpha)`` and ``x`` in ``[2**-t, 2**(1-t))`` the sum is
    ``(sum_{a<t} r**a - r**t) / 2``; at ``x = 0`` it is ``r / (2*(1-r))``.
    """
    if alpha < 2:
        raise ValueError("the Walsh series converges only for alpha >= 2")
    r = 2.0 ** (1 - alpha)
    v = np.arange(1 << bits, dtype=np.int64)
    # leading-digit position t of x = v / 2**bits
    t = np.empty_like(v)
    t[0] = 0
    t[1:] = bits - np.floor(np.log2(v[1:])).astype(np.int64)
    phi = 0.5 * (r * (1.0 - r ** (t - 1)) / (1.0 - r) - r**t)
    phi[0] = 0.5 * r / (1.0 - r)
    return phi


def quality_E(cfg: LatticeConfig, alpha: int) -> float:
    """Quality criterion ``E_d(q) = sum_{0 != k in dual} 2**(-alpha*mu_1(k))``.

    Evaluated through the per-point product form of the Walsh-series kernel.
    """
    phi = walsh_kernel_table(alpha, cfg.m)
    pts = lattice_points(cfg).astype(np.int64)
    prod = np.prod(1.0 + phi[pts], axis=1)
    return float(np.sum(prod) / cfg.n - 1.0)


def cbc_bound(m: int, d: int, alpha: int, lam: float) -> float:
    """Upper bound on ``E_d`` for a CBC-constructed generating vector."""
    if not 1 <= lam < alpha:
        raise ValueError("lambda must lie in [1, alpha)")
    base = 1.0 + 1.0 / (2.0 ** (alpha / lam) - 2.0)
    return (2.0 / ((1 << m) - 1)) ** lam * (base**d - 1.0) ** lam


def _prime_factors(n: int) -> list[int]:
    out = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


def _powmod(g: int, e: int, p: int) -> int:
    r = 1
    while e:
        if e & 1:
            r = _mulmod(r, g, p)
        g = _mulmod(g, g, p)
        e >>= 1
    return r


def primitive_element(p: int) -> int:
    """Smallest bitmask generator of the multiplicative group of GF(2)[x]/p."""
    m = p.bit_length() - 1
    order = (1 << m) - 1
    if order == 1:
        return 1
    factors = _prime_factors(order)
    for g in range(2, 1 << m):
        if all(_powmod(g, order // f, p) != 1 for f in factors):
            return g
    raise AssertionError("unreachable: a finite field has a primitive element")


def _candidate_column(q: int, p: int, m: int) -> np.ndarray:
    return _span(_column_ints(q, p, m)).astype(np.int64)


def _direct_scores(prod: np.ndarray, phi: np.ndarray, cands: Sequence[int], p: int, m: int):
    n = 1 << m
    return np.array(
        [np.sum(prod * (1.0 + phi[_candidate_column(q, p, m)])) / n - 1.0 for q in cands]
    )


def _fast_scores(prod: np.ndarray, phi: np.ndarray, p: int, m: int, g: int) -> np.ndarray:
    """Scores for every nonzero candidate via one circular correlation.

    With ``k = g**a`` and ``q = g**b`` the coordinate only depends on
    ``a + b (mod 2**m - 1)``, which turns the candidate loop into an FFT.
    """
    n = 1 << m
    order = n - 1
    powers = np.empty(order, dtype=np.int64)
    acc = 1
    for a in range(order):
        powers[a] = acc
        acc = _mulmod(acc, g, p)
    theta = np.array([theta_m(int(c), p, m) for c in powers], dtype=np.int64)
    weights = 1.0 + phi[theta]
    x = prod[powers]
    corr = np.fft.irfft(np.conj(np.fft.rfft(x)) * np.fft.rfft(weights), n=order)
    base = prod[0] * (1.0 + phi[0])
    scores = np.empty(n)
    scores[0] = np.inf
    scores[powers] = (base + corr) / n - 1.0
    return scores


def cbc_construct(m: int, s: int, alpha: int, method: str = "fast") -> InterlacedRule:
    """Component-by-component construction of an interlaced polynomial lattice rule.

    The ``alpha*s`` generator components are chosen greedily, each minimising
    ``E_d`` over ``q in G_m \\ {0}``.  Ties (relative 1e-12) go to the smallest
    bitmask.  ``method="fast"`` screens candidates by FFT and re-scores the
    leading ones directly; ``method="direct"`` scores every candidate in O(n).
    """
    if m < 1 or s < 1:
        raise ValueError("m and s must be >= 1")
    if alpha < 2:
        raise ValueError("interlacing factor alpha must be >= 2")
    if m > MAX_M or alpha * m > MAX_BITS:
        raise ValueError(f"bit budget exceeded (m <= {MAX_M}, alpha*m <= {MAX_BITS})")
    if method not in ("fast", "direct"):
        raise ValueError(f"unknown method {method!r}")
    p = smallest_irreducible(m)
    n = 1 << m
    phi = walsh_kernel_table(alpha, m)
    prod = np.ones(n)
    g = primitive_element(p) if method == "fast" else None
    gen: list[int] = []
    e_val = float("nan")
    cands_all = list(range(1, n))
    for comp in range(alpha * s):
        if comp == 0:
            # every nonzero q yields the full dyadic grid, so all candidates tie
            cands = [1]
        elif method == "fast":
            approx = _fast_scores(prod, phi, p, m, g)
            lo = np.min(approx[1:])
            cands = [q for q in cands_all if approx[q] <= lo + 1e-9 * abs(lo) + 1e-300]
        else:
            cands = cands_all
        scores = _direct_scores(prod, phi, cands, p, m)
        best = np.min(scores)
        tol = 1e-12 * abs(best)
        q_star = min(q for q, v in zip(cands, scores) if v <= best + tol)
        gen.append(q_star)
        prod = prod * (1.0 + phi[_candidate_column(q_star, p, m)])
        e_val = float(np.sum(prod) / n - 1.0)
    return InterlacedRule(LatticeConfig(m, p, tuple(gen)), alpha, quality=e_val)


def ctilde(alpha: int, lam: float, s: int) -> float:
    """Worst-case error constant of the interlaced rule in the unit-cube space."""
    if not 1 <= lam < alpha:
        raise ValueError("lambda must lie in [1, alpha)")
    base = 1.0 + 1.0 / (2.0 ** (alpha / lam) - 2.0)
    return 4.0**lam * 2.0 ** (alpha * (alpha - 1) * s / 2.0) * (base ** (alpha * s) - 1.0) ** lam


def wce_bound(rule: InterlacedRule, lam: float) -> float:
    """Worst-case error bound ``Ctilde / n**lambda`` for ``rule``."""
    return ctilde(rule.alpha, lam, rule.s) / float(rule.n) ** lam


def rule_to_text(rule: InterlacedRule) -> str:
    """Serialize as ``m d alpha p q_1 ... q_d`` with hexadecimal bitmasks."""
    lat = rule.lattice
    fields = [str(lat.m), str(lat.d), str(rule.alpha), f"{lat.modulus:x}"]
    fields += [f"{q:x}" for q in lat.gen]
    return " ".join(fields) + "\n"


def rule_from_text(text: str) -> InterlacedRule:
    parts = text.split()
    if len(parts) < 4:
        raise ValueError("rule text needs at least 'm d alpha p'")
    m, d, alpha = int(parts[0]), int(parts[1]), int(parts[2])
    p = int(parts[3], 16)
    gen = tuple(int(t, 16) for t in parts[4:])
    if len(gen) != d:
        raise ValueError(f"expected {d} generator entries, got {len(gen)}")
    return InterlacedRule(LatticeConfig(m, p, gen), alpha)


@lru_cache(maxsize=64)
def cached_rule(m: int, s: int, alpha: int) -> InterlacedRule:
    """Memoized ``cbc_construct`` for repeated use by the cubature layer."""
    return cbc_construct(m, s, alpha)


def log2_exact(n: int) -> int:
    """Exponent of an exact power of two."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"{n} is not a power of two")
    return int(math.log2(n))
