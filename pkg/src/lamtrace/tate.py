"""Period lattice Gamma, the multiplier xi and finite-depth Tate module arithmetic.

xi acts on Gamma = Z omega1 + Z omega2 through an integer matrix A whose
columns are the coordinates of xi*omega1 and xi*omega2.  Lattice elements are
integer coordinate pairs; every count below is an exact integer computation
and the complex embedding is only used for the leafwise geometry.
"""

from __future__ import annotations

import cmath
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from sympy import Matrix
from sympy.matrices.normalforms import hermite_normal_form

from .explicit_formula import guillemin_sternberg_weight

__all__ = [
    "DegenerateBasisError",
    "DepthExhaustedError",
    "LatticeData",
    "OrbitFixedPoint",
    "OrbitWeightReport",
    "TateDigits",
    "digit_set",
    "dual_basis",
    "dual_index",
    "dual_lattice",
    "fixed_points_mod_lattice",
    "in_sublattice",
    "leaf_jacobian",
    "one_minus_xi_bijectivity",
    "orbit_weight_report",
    "quotient_count",
    "quotient_reps",
    "reduce_mod",
    "solve_fixed_point",
    "standard_lattices",
    "tate_haar_ratio",
    "xi_multiply",
]

Mat = tuple[tuple[int, int], tuple[int, int]]
Vec = tuple[int, int]


class DepthExhaustedError(OverflowError):
    pass


class DegenerateBasisError(ValueError):
    pass


def _mul(A: Mat, B: Mat) -> Mat:
    return tuple(tuple(sum(A[i][k] * B[k][j] for k in range(2)) for j in range(2)) for i in range(2))


def _apply(A: Mat, x: Vec) -> Vec:
    return (A[0][0] * x[0] + A[0][1] * x[1], A[1][0] * x[0] + A[1][1] * x[1])


def _det(A: Mat) -> int:
    return A[0][0] * A[1][1] - A[0][1] * A[1][0]


def _power(A: Mat, k: int) -> Mat:
    out: Mat = ((1, 0), (0, 1))
    for _ in range(k):
        out = _mul(out, A)
    return out


def _id_minus(A: Mat) -> Mat:
    return ((1 - A[0][0], -A[0][1]), (-A[1][0], 1 - A[1][1]))


@dataclass(frozen=True)
class LatticeData:
    omega1: complex
    omega2: complex
    xi_matrix: Mat
    supersingular: bool = False

    def __post_init__(self):
        A = tuple(tuple(int(x) for x in row) for row in self.xi_matrix)
        object.__setattr__(self, "xi_matrix", A)
        if abs((self.omega2 / self.omega1).imag) < 1e-12:
            raise DegenerateBasisError("omega1, omega2 are R-linearly dependent")
        if _det(A) <= 0:
            raise ValueError("xi matrix must have positive determinant q")
        # ad - bc = q and the trace a give X^2 - aX + q exactly; check the embedding agrees
        xi = self.xi
        image2 = A[0][1] * self.omega1 + A[1][1] * self.omega2
        if abs(xi * self.omega2 - image2) > 1e-9 * max(1.0, abs(image2)):
            raise ValueError("xi matrix is not multiplication by a complex number on this basis")
        if self.trace**2 >= 4 * self.q:
            raise ValueError("xi must be non-real with |xi|^2 = q")

    @property
    def q(self) -> int:
        return _det(self.xi_matrix)

    @property
    def trace(self) -> int:
        return self.xi_matrix[0][0] + self.xi_matrix[1][1]

    @property
    def xi(self) -> complex:
        A = self.xi_matrix
        return (A[0][0] * self.omega1 + A[1][0] * self.omega2) / self.omega1

    @property
    def transversal_dimension(self) -> int:
        return 2 if self.supersingular else 1

    def embed(self, x) -> complex:
        return x[0] * self.omega1 + x[1] * self.omega2

    def coords(self, z: complex) -> tuple[float, float]:
        B = np.array([[self.omega1.real, self.omega2.real], [self.omega1.imag, self.omega2.imag]])
        c = np.linalg.solve(B, np.array([z.real, z.imag]))
        return float(c[0]), float(c[1])

    # constructors

    @classmethod
    def gaussian(cls) -> "LatticeData":
        """Z[i] with xi = 1 + i (q = 2)."""
        return cls(1 + 0j, 1j, ((1, -1), (1, 1)), supersingular=True)

    @classmethod
    def eisenstein(cls) -> "LatticeData":
        """Z[omega], omega = e^{2 pi i/3}, with xi = sqrt(-3) = 1 + 2 omega (q = 3)."""
        w = cmath.exp(2j * math.pi / 3)
        return cls(1 + 0j, w, ((1, -2), (2, -1)), supersingular=True)

    @classmethod
    def from_frobenius(cls, q: int, a: int, p: int | None = None) -> "LatticeData":
        """Z + Z xi with xi a root of X^2 - aX + q, Im xi > 0."""
        if a * a >= 4 * q:
            raise ValueError("need a^2 < 4q for a non-real multiplier")
        xi = complex(a / 2, math.sqrt(4 * q - a * a) / 2)
        ss = p is not None and a % p == 0
        return cls(1 + 0j, xi, ((0, -q), (1, a)), supersingular=ss)

    def to_dict(self) -> dict:
        return {
            "omega1": [self.omega1.real, self.omega1.imag],
            "omega2": [self.omega2.real, self.omega2.imag],
            "xi_matrix": [list(r) for r in self.xi_matrix],
            "q": self.q,
            "a": self.trace,
            "supersingular": self.supersingular,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LatticeData":
        obj = json.loads(text)
        unknown = set(obj) - {"omega1", "omega2", "xi_matrix", "q", "a", "supersingular"}
        if unknown:
            raise ValueError(f"unknown lattice keys {sorted(unknown)}")
        return cls(
            complex(*obj["omega1"]),
            complex(*obj["omega2"]),
            tuple(tuple(r) for r in obj["xi_matrix"]),
            bool(obj.get("supersingular", False)),
        )


def standard_lattices() -> dict[str, LatticeData]:
    return {
        "gaussian": LatticeData.gaussian(),
        "eisenstein": LatticeData.eisenstein(),
        "q5a1": LatticeData.from_frobenius(5, 1, p=5),
    }


# ---------------------------------------------------------------------------
# sublattices and quotients


@lru_cache(maxsize=256)
def _hnf(S: Mat) -> tuple[int, int, int]:
    """Upper triangular basis (h11, h12, h22) of the column span of S."""
    H = hermite_normal_form(Matrix(S))
    h11, h12, h22 = int(H[0, 0]), int(H[0, 1]), int(H[1, 1])
    if int(H[1, 0]) != 0 or h11 <= 0 or h22 <= 0:
        raise ArithmeticError("unexpected Hermite normal form")
    if h11 * h22 != abs(_det(S)):
        raise ArithmeticError("Hermite form lost the index")
    return h11, h12, h22


def in_sublattice(S: Mat, x) -> bool:
    """x in S Z^2, by exact integer solve with the adjugate."""
    d = _det(S)
    y0 = S[1][1] * x[0] - S[0][1] * x[1]
    y1 = -S[1][0] * x[0] + S[0][0] * x[1]
    return y0 % d == 0 and y1 % d == 0


def reduce_mod(S: Mat, x) -> Vec:
    """Canonical representative of x mod S Z^2 (0 <= y < h22, 0 <= x < h11)."""
    h11, h12, h22 = _hnf(S)
    k, y = divmod(int(x[1]), h22)
    return ((int(x[0]) - k * h12) % h11, y)


def quotient_reps(S: Mat) -> list[Vec]:
    h11, _, h22 = _hnf(S)
    return [(x, y) for y in range(h22) for x in range(h11)]


def quotient_count(ld: LatticeData, nu: int) -> int:
    """[Gamma : xi^nu Gamma] as |det A^nu|."""
    if nu < 1:
        raise ValueError("nu must be >= 1")
    return abs(_det(_power(ld.xi_matrix, nu)))


def digit_set(ld: LatticeData) -> list[Vec]:
    """q representatives of Gamma/xi Gamma inside the half-open parallelogram of the HNF basis of xi Gamma."""
    h11, h12, h22 = _hnf(ld.xi_matrix)
    digits = []
    for y in range(h22):
        start = -((-y * h12) // h22)  # ceil(y h12 / h22)
        digits.extend((x, y) for x in range(start, start + h11))
    digits.sort(key=lambda v: (v != (0, 0), v[1], v[0]))
    for u, v in itertools.combinations(digits, 2):
        if in_sublattice(ld.xi_matrix, (u[0] - v[0], u[1] - v[1])):
            raise ArithmeticError("digit set is not a transversal of Gamma/xi Gamma")
    if len(digits) != ld.q:
        raise ArithmeticError("digit set has the wrong size")
    return digits


@lru_cache(maxsize=64)
def _digit_lookup(ld: LatticeData) -> dict[Vec, Vec]:
    return {reduce_mod(ld.xi_matrix, d): d for d in digit_set(ld)}


def _divide_by_xi(ld: LatticeData, x) -> Vec:
    A, q = ld.xi_matrix, ld.q
    y0 = A[1][1] * x[0] - A[0][1] * x[1]
    y1 = -A[1][0] * x[0] + A[0][0] * x[1]
    if y0 % q or y1 % q:
        raise ArithmeticError("element is not divisible by xi")
    return (y0 // q, y1 // q)


# ---------------------------------------------------------------------------
# Tate digits


@dataclass(frozen=True)
class TateDigits:
    """sum_l a_l xi^l for l = -k_neg .. -k_neg + len(digits) - 1, each a_l in the digit set."""

    k_neg: int
    digits: tuple[Vec, ...]

    def __post_init__(self):
        if self.k_neg < 0:
            raise ValueError("k_neg must be >= 0")
        object.__setattr__(self, "digits", tuple(tuple(int(c) for c in d) for d in self.digits))

    @property
    def top(self) -> int:
        return len(self.digits) - 1 - self.k_neg

    def digit(self, level: int) -> Vec:
        i = level + self.k_neg
        return self.digits[i] if 0 <= i < len(self.digits) else (0, 0)

    @classmethod
    def zero(cls, depth: int, k_neg: int = 0) -> "TateDigits":
        return cls(k_neg, ((0, 0),) * depth)

    @classmethod
    def from_lattice(cls, ld: LatticeData, x, depth: int) -> "TateDigits":
        """Digits of x in Gamma at levels 0..depth-1 (x mod xi^depth Gamma)."""
        lookup = _digit_lookup(ld)
        out, cur = [], (int(x[0]), int(x[1]))
        for _ in range(depth):
            d = lookup[reduce_mod(ld.xi_matrix, cur)]
            out.append(d)
            cur = _divide_by_xi(ld, (cur[0] - d[0], cur[1] - d[1]))
        return cls(0, tuple(out))

    def to_lattice(self, ld: LatticeData) -> Vec:
        """sum a_l xi^l for a window starting at level 0, as a lattice element."""
        if self.k_neg:
            raise ValueError("negative levels do not lie in Gamma")
        x = (0, 0)
        for d in reversed(self.digits):
            x = _apply(ld.xi_matrix, x)
            x = (x[0] + d[0], x[1] + d[1])
        return x

    def value(self, ld: LatticeData) -> complex:
        xi = ld.xi
        return sum(ld.embed(d) * xi ** (l - self.k_neg) for l, d in enumerate(self.digits))

    def add(self, ld: LatticeData, other: "TateDigits", wrap: bool = False) -> "TateDigits":
        """Digitwise sum with carries; a carry out of the window is an error unless ``wrap``."""
        if (self.k_neg, len(self.digits)) != (other.k_neg, len(other.digits)):
            raise ValueError("windows differ")
        lookup = _digit_lookup(ld)
        out, carry = [], (0, 0)
        for a, b in zip(self.digits, other.digits):
            s = (a[0] + b[0] + carry[0], a[1] + b[1] + carry[1])
            d = lookup[reduce_mod(ld.xi_matrix, s)]
            out.append(d)
            carry = _divide_by_xi(ld, (s[0] - d[0], s[1] - d[1]))
        if carry != (0, 0) and not wrap:
            raise DepthExhaustedError("carry escapes the digit window")
        return TateDigits(self.k_neg, tuple(out))


def xi_multiply(ld: LatticeData, t: TateDigits) -> TateDigits:
    """Shift every digit up one level inside the same window."""
    if not t.digits:
        return t
    if t.digits[-1] != (0, 0):
        raise DepthExhaustedError("top digit would leave the window")
    return TateDigits(t.k_neg, ((0, 0),) + t.digits[:-1])


def one_minus_xi_bijectivity(ld: LatticeData, depth: int, power: int = 1) -> bool:
    """Is x -> x - xi^power x a bijection of Gamma/xi^depth Gamma?  (exhaustive)"""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    S = _power(ld.xi_matrix, depth)
    T = _id_minus(_power(ld.xi_matrix, power))
    reps = quotient_reps(S)
    image = {reduce_mod(S, _apply(T, x)) for x in reps}
    return len(image) == len(reps)


def tate_haar_ratio(ld: LatticeData, nu: int, depth: int = 2) -> Fraction:
    """mu(xi^nu C)/mu(C) for C = Gamma (the whole Tate module), by counting cells of level depth + nu."""
    S_fine = _power(ld.xi_matrix, depth + nu)
    X = _power(ld.xi_matrix, nu)
    cells = quotient_reps(_power(ld.xi_matrix, depth))
    image = {reduce_mod(S_fine, _apply(X, c)) for c in cells}
    # each cell at level depth has mass q^-depth; each image cell q^-(depth+nu)
    return Fraction(len(image) * ld.q**depth, len(cells) * ld.q ** (depth + nu))


# ---------------------------------------------------------------------------
# dual lattice


def dual_lattice(ld: LatticeData) -> tuple[complex, complex]:
    """Basis (w1, w2) of Gamma* with Re(w_i conj(omega_j)) = 2 pi delta_ij."""
    return dual_basis(ld.omega1, ld.omega2)


def dual_basis(omega1: complex, omega2: complex) -> tuple[complex, complex]:
    B = np.array([[omega1.real, omega2.real], [omega1.imag, omega2.imag]])
    det = float(np.linalg.det(B))
    if abs(det) < 1e-12:
        raise DegenerateBasisError("basis is degenerate")
    D = 2 * math.pi * np.linalg.inv(B).T
    return complex(D[0, 0], D[1, 0]), complex(D[0, 1], D[1, 1])


def dual_index(ld: LatticeData, n: int) -> tuple[int, float]:
    """[(xi^n Gamma)* : Gamma*] exactly (integer matrix) and from covolumes."""
    An = _power(ld.xi_matrix, n)
    exact = abs(_det(An))
    w1, w2 = dual_lattice(ld)
    big = np.array([[w1.real, w2.real], [w1.imag, w2.imag]])
    B = np.array([[ld.omega1.real, ld.omega2.real], [ld.omega1.imag, ld.omega2.imag]])
    Bn = B @ np.array(An, dtype=float)
    small = 2 * math.pi * np.linalg.inv(Bn).T
    return exact, abs(np.linalg.det(big)) / abs(np.linalg.det(small))


# ---------------------------------------------------------------------------
# closed orbits


@dataclass(frozen=True)
class OrbitFixedPoint:
    gamma: complex
    z0: complex
    k: int
    residual: float


def solve_fixed_point(ld: LatticeData, gamma: complex, k: int) -> OrbitFixedPoint:
    """z0 with xi^-k z0 = z0 + gamma."""
    if k < 1:
        raise ValueError("k must be >= 1")
    lam = ld.xi ** (-k)
    z0 = gamma / (lam - 1)
    return OrbitFixedPoint(gamma, z0, k, abs(lam * z0 - z0 - gamma))


def leaf_jacobian(ld: LatticeData, k: int, direction: str = "-") -> float:
    lam = ld.xi ** (-k if direction == "-" else k)
    return abs(lam - 1) ** 2


def fixed_points_mod_lattice(ld: LatticeData, k: int) -> list[OrbitFixedPoint]:
    """All z in C/Gamma with xi^-k z - z in xi^-k Gamma, i.e. (1 - xi^k) z in Gamma.

    Their number is |det(I - A^k)| = #E(F_{q^k}).
    """
    T = _id_minus(_power(ld.xi_matrix, k))
    d = _det(T)
    if d == 0:
        raise ArithmeticError("1 - xi^k is singular")
    inv = np.array([[T[1][1], -T[0][1]], [-T[1][0], T[0][0]]], dtype=float) / d
    xi_k = ld.xi**k
    out = []
    for rep in quotient_reps(T):
        c = inv @ np.array(rep, dtype=float)
        c -= np.floor(c + 1e-12)  # into the fundamental domain of Gamma
        z = ld.embed(c)
        gamma = (z - xi_k * z) / xi_k  # xi^-k z - z, an element of xi^-k Gamma
        out.append(solve_fixed_point(ld, gamma, k))
    return out


@dataclass(frozen=True)
class OrbitWeightReport:
    k: int
    direction: str
    position: float
    jac_leaf: float
    jac_transversal: Fraction
    weight: Fraction
    coefficient: float

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "direction": self.direction,
            "position": self.position,
            "jac_leaf": self.jac_leaf,
            "jac_transversal": str(self.jac_transversal),
            "weight": str(self.weight),
            "coefficient": self.coefficient,
        }


def orbit_weight_report(ld: LatticeData, k: int, direction: str, depth: int = 3) -> OrbitWeightReport:
    """Coefficient of the delta at -+ k log q for an orbit of length log q, from the finite models.

    Backwards the transversal map is v -> xi^-k v + gamma, whose Jacobian is
    Jac(xi^-k) * Jac(1 - xi^k) = q^k * 1; forwards it is xi^k v + gamma - v
    with Jacobian 1.
    """
    if direction not in ("+", "-"):
        raise ValueError("direction must be '+' or '-'")
    if not one_minus_xi_bijectivity(ld, depth, power=k):
        raise ArithmeticError("1 - xi^k is not invertible on the finite Tate model")
    if direction == "-":
        jac_t = 1 / tate_haar_ratio(ld, k)
    else:
        jac_t = Fraction(1)
    multiplier = ld.xi ** (-k if direction == "-" else k)
    weight = guillemin_sternberg_weight(multiplier, jac_t, direction)
    jac_leaf = abs(multiplier - 1) ** 2
    log_q = math.log(ld.q)
    position = k * log_q if direction == "+" else -k * log_q
    return OrbitWeightReport(k, direction, position, jac_leaf, jac_t, weight, log_q * float(weight))
