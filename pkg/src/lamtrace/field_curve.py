"""Finite fields, short Weierstrass curves and the rational zeta function.

Field elements of F_q (q = p^f) are plain integers in ``range(q)``; the base-p
digits of an element are the coefficients (lowest first) of its polynomial
representative modulo the field's irreducible modulus.  For f = 1 this is the
usual residue representation, and the constants of F_p embed in every
extension as the integers ``0..p-1``.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

from sympy import Poly, isprime, symbols

__all__ = [
    "CONWAY_POLYNOMIALS",
    "CurveParseError",
    "CurveSpec",
    "FiniteField",
    "PoleError",
    "ZetaData",
    "Zero",
    "count_points",
    "parse_curve",
    "zeta_data",
    "zeta_eval",
]

_X = symbols("x")

# Monic moduli, coefficients lowest degree first.
CONWAY_POLYNOMIALS: dict[tuple[int, int], tuple[int, ...]] = {
    (2, 2): (1, 1, 1),
    (2, 3): (1, 1, 0, 1),
    (2, 4): (1, 1, 0, 0, 1),
    (3, 2): (2, 2, 1),
    (3, 3): (1, 2, 0, 1),
    (3, 4): (2, 0, 0, 2, 1),
    (5, 2): (2, 4, 1),
    (7, 2): (3, 6, 1),
}


class CurveParseError(ValueError):
    pass


class PoleError(ZeroDivisionError):
    pass


def _is_irreducible(coeffs: tuple[int, ...], p: int) -> bool:
    return Poly(list(reversed(coeffs)), _X, modulus=p).is_irreducible


def _first_irreducible(p: int, f: int) -> tuple[int, ...]:
    for code in range(p**f):
        low = [(code // p**i) % p for i in range(f)]
        coeffs = tuple(low) + (1,)
        if coeffs[0] != 0 and _is_irreducible(coeffs, p):
            return coeffs
    raise ValueError(f"no irreducible polynomial of degree {f} over F_{p}")


@dataclass(frozen=True)
class FiniteField:
    p: int
    f: int = 1
    modulus: tuple[int, ...] = ()

    def __post_init__(self):
        if not isprime(self.p):
            raise ValueError(f"p={self.p} is not prime")
        if self.f < 1:
            raise ValueError("extension degree f must be >= 1")
        if not self.modulus:
            if self.f == 1:
                mod = (0, 1)
            else:
                mod = CONWAY_POLYNOMIALS.get((self.p, self.f)) or _first_irreducible(self.p, self.f)
            object.__setattr__(self, "modulus", tuple(mod))
        mod = tuple(c % self.p for c in self.modulus)
        if len(mod) != self.f + 1 or mod[-1] != 1:
            raise ValueError("modulus must be monic of degree f")
        if self.f > 1 and not _is_irreducible(mod, self.p):
            raise ValueError(f"modulus {mod} is reducible over F_{self.p}")
        object.__setattr__(self, "modulus", mod)

    @property
    def q(self) -> int:
        return self.p**self.f

    def _coeffs(self, a: int) -> list[int]:
        return [(a // self.p**i) % self.p for i in range(self.f)]

    def _encode(self, coeffs) -> int:
        return sum((c % self.p) * self.p**i for i, c in enumerate(coeffs))

    def add(self, a: int, b: int) -> int:
        if self.f == 1:
            return (a + b) % self.p
        return self._encode(x + y for x, y in zip(self._coeffs(a), self._coeffs(b)))

    def neg(self, a: int) -> int:
        if self.f == 1:
            return -a % self.p
        return self._encode(-x for x in self._coeffs(a))

    def mul(self, a: int, b: int) -> int:
        if self.f == 1:
            return a * b % self.p
        x, y = self._coeffs(a), self._coeffs(b)
        prod = [0] * (2 * self.f - 1)
        for i, xi in enumerate(x):
            if xi:
                for j, yj in enumerate(y):
                    prod[i + j] += xi * yj
        # reduce by the monic modulus from the top down
        for deg in range(len(prod) - 1, self.f - 1, -1):
            c = prod[deg] % self.p
            if c:
                for i, m in enumerate(self.modulus[:-1]):
                    prod[deg - self.f + i] -= c * m
            prod[deg] = 0
        return self._encode(prod[: self.f])

    def pow(self, a: int, e: int) -> int:
        result, base = 1, a
        while e:
            if e & 1:
                result = self.mul(result, base)
            base = self.mul(base, base)
            e >>= 1
        return result

    def elements(self) -> range:
        return range(self.q)

    @cached_property
    def squares(self) -> frozenset[int]:
        return frozenset(self.mul(x, x) for x in self.elements())

    def chi(self, a: int) -> int:
        """Quadratic character: 0, 1 or -1."""
        if a == 0:
            return 0
        return 1 if a in self.squares else -1


@dataclass(frozen=True)
class CurveSpec:
    """Short Weierstrass curve y^2 = x^3 + a4 x + a6 over ``field``."""

    field: FiniteField
    a4: int
    a6: int

    def __post_init__(self):
        F = self.field
        if F.p <= 3:
            raise ValueError("short Weierstrass form requires p > 3")
        if not (0 <= self.a4 < F.q and 0 <= self.a6 < F.q):
            raise ValueError("coefficients must be encoded field elements in range(q)")
        four_a4_cubed = F.mul(4 % F.p, F.pow(self.a4, 3))
        tw7_a6_sq = F.mul(27 % F.p, F.mul(self.a6, self.a6))
        if F.add(four_a4_cubed, tw7_a6_sq) == 0:
            raise ValueError("singular curve: 4 a4^3 + 27 a6^2 = 0")

    def rhs(self, x: int) -> int:
        F = self.field
        return F.add(F.add(F.pow(x, 3), F.mul(self.a4, x)), self.a6)

    def base_change(self, n: int) -> "CurveSpec":
        """The same equation over F_{p^n}; only for curves over a prime field."""
        if self.field.f != 1:
            raise NotImplementedError("base change is implemented for prime fields only")
        return CurveSpec(FiniteField(self.field.p, n), self.a4, self.a6)

    def to_text(self) -> str:
        return f"p={self.field.p} f={self.field.f} a4={self.a4} a6={self.a6}"


_CURVE_KEYS = {"p", "f", "a4", "a6"}


def parse_curve(text: str) -> CurveSpec:
    """Parse ``"p=5 f=1 a4=1 a6=1"`` (f defaults to 1)."""
    pairs = {}
    for token in text.replace(",", " ").split():
        m = re.fullmatch(r"(\w+)=(-?\d+)", token)
        if not m:
            raise CurveParseError(f"bad token {token!r} in curve spec")
        key, value = m.group(1), int(m.group(2))
        if key not in _CURVE_KEYS:
            raise CurveParseError(f"unknown key {key!r} in curve spec")
        pairs[key] = value
    missing = {"p", "a4", "a6"} - pairs.keys()
    if missing:
        raise CurveParseError(f"curve spec missing {sorted(missing)}")
    try:
        F = FiniteField(pairs["p"], pairs.get("f", 1))
        return CurveSpec(F, pairs["a4"] % F.q, pairs["a6"] % F.q)
    except ValueError as exc:
        raise CurveParseError(str(exc)) from exc


def count_points(curve: CurveSpec) -> int:
    """#E(F_q) including the point at infinity."""
    F = curve.field
    return 1 + sum(1 + F.chi(curve.rhs(x)) for x in F.elements())


@dataclass(frozen=True)
class Zero:
    re: Fraction
    im: float

    @property
    def value(self) -> complex:
        return complex(float(self.re), self.im)


@dataclass(frozen=True)
class ZetaData:
    """Frobenius data of an elliptic curve; xi is kept as the pair (a, a^2 - 4q)."""

    q: int
    trace_a: int
    p: int | None = None
    genus: int = 1
    embedding: str = "Im xi >= 0"
    zeros: tuple[Zero, ...] = field(init=False)

    def __post_init__(self):
        if self.trace_a**2 > 4 * self.q:
            raise ValueError(f"trace {self.trace_a} violates the Hasse bound for q={self.q}")
        arg = math.atan2(math.sqrt(4 * self.q - self.trace_a**2) / 2, self.trace_a / 2)
        im = arg / math.log(self.q)
        object.__setattr__(self, "zeros", (Zero(Fraction(1, 2), im), Zero(Fraction(1, 2), -im)))

    @property
    def discriminant(self) -> int:
        return self.trace_a**2 - 4 * self.q

    @property
    def xi_re(self) -> Fraction:
        return Fraction(self.trace_a, 2)

    @property
    def xi_im_sq(self) -> Fraction:
        return Fraction(-self.discriminant, 4)

    def xi_norm_sq(self) -> Fraction:
        return self.xi_re**2 + self.xi_im_sq

    @property
    def xi(self) -> complex:
        return complex(float(self.xi_re), math.sqrt(self.xi_im_sq))

    @property
    def supersingular(self) -> bool:
        return self.p is not None and self.trace_a % self.p == 0

    @property
    def zero_values(self) -> tuple[complex, ...]:
        return tuple(z.value for z in self.zeros)

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "a": self.trace_a,
            "xi_re": float(self.xi_re),
            "xi_im": self.xi.imag,
            "zeros": [{"re": float(z.re), "im": z.im} for z in self.zeros],
            "supersingular": self.supersingular,
        }


def zeta_data(curve: CurveSpec) -> ZetaData:
    q = curve.field.q
    return ZetaData(q=q, trace_a=q + 1 - count_points(curve), p=curve.field.p)


def zeta_eval(zd: ZetaData, s: complex, pole_tol: float = 1e-12) -> complex:
    u = cmath.exp(-s * math.log(zd.q))
    den = (1 - u) * (1 - zd.q * u)
    if abs(den) < pole_tol:
        raise PoleError(f"zeta has a pole near s={s}")
    return (1 - zd.trace_a * u + zd.q * u * u) / den
