"""Closed points by degree and the primitive closed-orbit census they induce."""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from sympy import divisors
from sympy.functions.combinatorial.numbers import mobius

from .field_curve import ZetaData

__all__ = [
    "CensusIntegrityError",
    "ClosedPointCensus",
    "census_from_counts",
    "closed_point_census",
    "default_degree",
    "euler_partial_product",
    "extension_count",
    "orbit_census",
    "trace_powers",
]


class CensusIntegrityError(ArithmeticError):
    """Moebius inversion produced a non-integral or negative count (a bug, never bad input)."""


def trace_powers(q: int, a: int, n: int) -> list[int]:
    """t_0..t_n with t_k = xi^k + conj(xi)^k, from t_{k+1} = a t_k - q t_{k-1}."""
    t = [2, a]
    while len(t) <= n:
        t.append(a * t[-1] - q * t[-2])
    return t[: n + 1]


def extension_count(zd: ZetaData, n: int) -> int:
    """#E(F_{q^n}) = q^n + 1 - t_n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return zd.q**n + 1 - trace_powers(zd.q, zd.trace_a, n)[n]


@dataclass(frozen=True)
class ClosedPointCensus:
    q: int
    max_degree: int
    counts: tuple[int, ...]  # B_1..B_D
    point_counts: tuple[int, ...]  # N_1..N_D

    def B(self, d: int) -> int:
        return self.counts[d - 1]

    def N(self, n: int) -> int:
        return self.point_counts[n - 1]

    @property
    def log_q(self) -> float:
        return math.log(self.q)

    def lengths(self) -> list[tuple[int, float]]:
        """Orbit lengths kept as (d, log q) so callers control the product."""
        return [(d, self.log_q) for d in range(1, self.max_degree + 1)]

    def reconstruct_point_counts(self) -> list[int]:
        return [sum(d * self.B(d) for d in divisors(n)) for n in range(1, self.max_degree + 1)]

    def rows(self) -> list[dict]:
        return [
            {"d": d, "N_d": self.N(d), "B_d": self.B(d), "length": d * self.log_q}
            for d in range(1, self.max_degree + 1)
        ]

    def to_dict(self) -> dict:
        return {"q": self.q, "max_degree": self.max_degree, "rows": self.rows()}


def census_from_counts(q: int, point_counts) -> ClosedPointCensus:
    point_counts = tuple(int(n) for n in point_counts)
    B = []
    for d in range(1, len(point_counts) + 1):
        total = sum(int(mobius(d // e)) * point_counts[e - 1] for e in divisors(d))
        if total % d:
            raise CensusIntegrityError(f"degree {d}: sum {total} not divisible by {d}")
        if total < 0:
            raise CensusIntegrityError(f"degree {d}: negative closed-point count")
        B.append(total // d)
    return ClosedPointCensus(q, len(point_counts), tuple(B), point_counts)


def closed_point_census(zd: ZetaData, D: int) -> ClosedPointCensus:
    if D < 1:
        raise ValueError("D must be >= 1")
    t = trace_powers(zd.q, zd.trace_a, D)
    return census_from_counts(zd.q, [zd.q**n + 1 - t[n] for n in range(1, D + 1)])


def default_degree(support: tuple[float, float], q: int) -> int:
    """Smallest D such that every orbit length d log q inside the support has d <= D."""
    reach = max(abs(support[0]), abs(support[1]))
    return max(1, math.ceil(reach / math.log(q)))


def orbit_census(zd: ZetaData, L_max: float, rel_tol: float = 1e-12) -> list[tuple[float, int]]:
    if L_max <= 0:
        raise ValueError("L_max must be positive")
    log_q = math.log(zd.q)
    D = math.floor(L_max / log_q * (1 + rel_tol))
    if D < 1:
        return []
    census = closed_point_census(zd, D)
    return [(d * log_q, census.B(d)) for d in range(1, D + 1)]


def _minus_log_one_minus(u: complex) -> complex:
    """-log(1 - u), by its power series when u is small."""
    if abs(u) > 1e-3:
        return -cmath.log(1 - u)
    total, power, j = 0j, u, 1
    while abs(power) > 1e-18 * abs(u):
        total += power / j
        j += 1
        power *= u
    return total


def euler_partial_product(census: ClosedPointCensus, s: complex) -> tuple[complex, float]:
    """Partial Euler product over degrees <= D and a bound on |zeta(s) - partial|.

    The bound uses B_d <= 4 q^d / d and needs Re s > 1.
    """
    q, D = census.q, census.max_degree
    sigma = s.real if isinstance(s, complex) else float(s)
    if sigma <= 1:
        raise ValueError("Euler product bound needs Re s > 1")
    log_q = math.log(q)
    # sum of logs: (1 - u)^B directly loses ~B * eps once B_d is large
    log_value = complex(0.0)
    for d in range(1, D + 1):
        log_value += census.B(d) * _minus_log_one_minus(cmath.exp(-s * d * log_q))
    value = cmath.exp(log_value)
    # |log zeta - log partial| <= sum_{d>D} B_d x^d/(1-x^d) with x = q^-sigma
    x = q ** (-sigma)
    ratio = q * x
    log_tail = 4 * ratio ** (D + 1) / ((D + 1) * (1 - ratio) * (1 - x))
    return value, abs(value) * math.expm1(log_tail)
