"""Both sides of the explicit formula for a curve over F_q.

Spectral side: for each eigenvalue family rho + 2 pi i nu / log q (rho = 0, the
zeta zeros rho_j, and 1) the truncated sum over |nu| <= nu_max of

    Phi(s) = integral of exp(s t) alpha(t) dt.

Geometric side: (2 - 2g) alpha(0) log q plus, for each closed point of degree
d and each iterate k >= 1, the orbit length d log q times the local weight of
the fixed point (1 forwards, q^(-kd) backwards) times alpha(+-k d log q).

By Poisson summation every spectral family equals a finite sum over the
lattice k log q inside supp(alpha); :func:`poisson_oracle` evaluates that sum
directly and is the truncation-free reference.
"""

from __future__ import annotations

import cmath
import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .census import ClosedPointCensus, census_from_counts, default_degree, trace_powers
from .field_curve import ZetaData

__all__ = [
    "CurveData",
    "DegenerateFixedPointError",
    "GeometricSide",
    "OrbitTerm",
    "QuadratureRule",
    "SpectralSide",
    "SpectralSum",
    "TestFunction",
    "TraceReport",
    "build_rule",
    "choose_nu_max",
    "convergence_trace",
    "exterior_power_trace",
    "geometric_side",
    "guillemin_sternberg_weight",
    "parse_alpha",
    "phi_transform",
    "poisson_oracle",
    "spectral_side",
    "spectral_sum",
    "spectral_sums",
    "verify_trace_formula",
]

QUADRATURE_TOL = 1e-13
FORMULA_TOL = 1e-8
TAIL_SAFETY = 10.0
_EPS = np.finfo(float).eps
_GL_ORDER = 20


class DegenerateFixedPointError(ValueError):
    pass


# ---------------------------------------------------------------------------
# test functions


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported test function alpha on [center - half_width, center + half_width].

    ``bump`` is A exp(-1/(1-u^2)) with u = (t - c)/w and is the only smooth
    kind; ``hat`` and ``gaussian_truncated`` (A exp(-4.5 u^2) cut at |u| = 1)
    are kept for diagnostics.
    """

    __test__ = False  # not a pytest class

    kind: str = "bump"
    center: float = 0.0
    half_width: float = 1.0
    amplitude: float = 1.0

    KINDS = ("bump", "gaussian_truncated", "hat")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown test-function kind {self.kind!r}")
        if not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def support(self) -> tuple[float, float]:
        return (self.center - self.half_width, self.center + self.half_width)

    def profile(self, u):
        """Shape on the normalized variable u; zero for |u| >= 1."""
        u = np.asarray(u, dtype=float)
        out = np.zeros_like(u)
        inside = np.abs(u) < 1
        ui = u[inside]
        if self.kind == "bump":
            out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
        elif self.kind == "hat":
            out[inside] = 1.0 - np.abs(ui)
        else:
            out[inside] = np.exp(-4.5 * ui * ui)
        return self.amplitude * out

    def at_offset(self, offset):
        return self.profile(np.asarray(offset, dtype=float) / self.half_width)

    def __call__(self, t):
        t_arr = np.asarray(t, dtype=float)
        value = self.at_offset(t_arr - self.center)
        return float(value) if np.ndim(t) == 0 else value

    def to_dict(self) -> dict:
        return {"kind": self.kind, "c": self.center, "w": self.half_width, "A": self.amplitude}


_ALPHA_KEYS = {"c": "center", "w": "half_width", "A": "amplitude"}


def parse_alpha(text: str) -> TestFunction:
    """Parse ``"bump:c=1.6094,w=0.5"`` (optional ``A=``)."""
    kind, _, params = text.partition(":")
    kwargs = {}
    for item in filter(None, params.split(",")):
        m = re.fullmatch(r"\s*(\w+)\s*=\s*([-+0-9.eE]+)\s*", item)
        if not m or m.group(1) not in _ALPHA_KEYS:
            raise ValueError(f"bad test-function parameter {item!r}")
        kwargs[_ALPHA_KEYS[m.group(1)]] = float(m.group(2))
    return TestFunction(kind=kind.strip() or "bump", **kwargs)


# ---------------------------------------------------------------------------
# quadrature


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Composite Gauss-Legendre nodes on supp(alpha), stored relative to the center."""

    center: float
    offsets: np.ndarray
    weights: np.ndarray  # quadrature weight times alpha(node)
    panels: int

    def mass(self, sigma: float) -> float:
        """Quadrature of |alpha(t)| exp(sigma t); bounds |Phi(sigma + i tau)|."""
        return float(np.sum(np.abs(self.weights) * np.exp(sigma * (self.center + self.offsets))))

    def phi(self, s) -> np.ndarray:
        s = np.atleast_1d(np.asarray(s, dtype=complex))
        local = np.exp(np.outer(s, self.offsets)) @ self.weights
        return np.exp(s * self.center) * local


def _composite_rule(alpha: TestFunction, panels: int) -> QuadratureRule:
    x, w = np.polynomial.legendre.leggauss(_GL_ORDER)
    edges = np.linspace(-1.0, 1.0, panels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    u = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wu = (half[:, None] * w[None, :]).ravel()
    hw = alpha.half_width
    return QuadratureRule(alpha.center, hw * u, hw * wu * alpha.profile(u), panels)


@lru_cache(maxsize=64)
def build_rule(alpha: TestFunction, max_freq: float = 0.0, tol: float = QUADRATURE_TOL) -> QuadratureRule:
    """Adaptive composite rule: panels double until Phi at the probe frequencies settles.

    Convergence is declared when successive refinements differ by at most
    ``tol`` times the integrand's L1 mass (floored at a few ulps of that mass).
    """
    cycles = max_freq * 2 * alpha.half_width / (2 * math.pi)
    panels = max(2, math.ceil(cycles / 2) + 2)
    probes = np.array([0.0, 1.0, 1j * max_freq, 1.0 + 1j * max_freq, 0.5 + 0.5j * max_freq])
    rule = _composite_rule(alpha, panels)
    for _ in range(12):
        finer = _composite_rule(alpha, 2 * panels)
        scale = max(finer.mass(0.0), finer.mass(1.0), np.finfo(float).tiny)
        diff = np.max(np.abs(finer.phi(probes) - rule.phi(probes)))
        if diff <= max(tol, 64 * _EPS) * scale:
            return finer
        panels *= 2
        rule = finer
    raise RuntimeError("quadrature failed to converge")


def phi_transform(alpha: TestFunction, s: complex, tol: float = QUADRATURE_TOL) -> complex:
    if alpha.amplitude == 0:
        return 0j
    rule = build_rule(alpha, abs(complex(s).imag), tol)
    return complex(rule.phi(s)[0])


# ---------------------------------------------------------------------------
# spectral side


@dataclass(frozen=True)
class SpectralSum:
    rho: complex
    nu_max: int
    value: complex
    truncation_bound: float
    quadrature_bound: float
    terms: np.ndarray = field(repr=False, compare=False)  # Phi at nu = -nu_max..nu_max

    @property
    def tail_bound(self) -> float:
        return self.truncation_bound + self.quadrature_bound

    def partial_sums(self) -> np.ndarray:
        """Symmetric partial sums S_n = sum_{|nu| <= n}, n = 0..nu_max."""
        N = self.nu_max
        pairs = self.terms[N + 1 :] + self.terms[:N][::-1]
        return self.terms[N] + np.concatenate([[0], np.cumsum(pairs)])

    def tail_bound_at(self, n: int, quadrature_tol: float = QUADRATURE_TOL) -> float:
        """Tail bound the same sum would report if truncated at n <= nu_max."""
        N = self.nu_max
        last = max(abs(self.terms[N + n]), abs(self.terms[N - n]))
        per_term = self.quadrature_bound / (2 * N + 1)
        return TAIL_SAFETY * n * last + (2 * n + 1) * per_term


@lru_cache(maxsize=4)
def _oscillation(alpha: TestFunction, log_q: float, nu_max: int, tol: float):
    omega = 2 * math.pi / log_q
    rule = build_rule(alpha, omega * nu_max, tol)
    nus = np.arange(nu_max + 1)
    E = np.exp(1j * omega * np.outer(nus, rule.offsets))
    # exp(i omega nu c) with the integer part of nu c / log q removed first
    turns = np.mod(nus * (alpha.center / log_q), 1.0)
    return rule, E, np.exp(2j * math.pi * turns)


def _fsum_complex(values) -> complex:
    values = np.asarray(values)
    return complex(math.fsum(values.real), math.fsum(values.imag))


_SUM_CACHE: dict[tuple, SpectralSum] = {}
_SUM_CACHE_LIMIT = 8192


def spectral_sums(
    alpha: TestFunction, rhos, q: int, nu_max: int, tol: float = QUADRATURE_TOL
) -> list[SpectralSum]:
    """``spectral_sum`` for several rho at once, sharing one matrix product.

    Results are cached: curves sharing a trace share their zeros, so sweeps
    ask for the same sums repeatedly.
    """
    if nu_max < 1:
        raise ValueError("nu_max must be >= 1")
    rhos = [complex(r) for r in rhos]
    keys = [(alpha, r, int(q), int(nu_max), float(tol)) for r in rhos]
    missing = list(dict.fromkeys(k for k in keys if k not in _SUM_CACHE))
    if missing:
        if len(_SUM_CACHE) + len(missing) > _SUM_CACHE_LIMIT:
            _SUM_CACHE.clear()
        for key, result in zip(missing, _compute_sums(alpha, [k[1] for k in missing], int(q), int(nu_max), float(tol))):
            _SUM_CACHE[key] = result
    return [_SUM_CACHE[k] for k in keys]


def spectral_sum(
    alpha: TestFunction, rho: complex, q: int, nu_max: int, tol: float = QUADRATURE_TOL
) -> SpectralSum:
    """Sum of Phi(rho + 2 pi i nu / log q) over |nu| <= nu_max, with its error bound."""
    return spectral_sums(alpha, [rho], q, nu_max, tol)[0]


def _compute_sums(alpha: TestFunction, rhos: list[complex], q: int, nu_max: int, tol: float) -> list[SpectralSum]:
    if alpha.amplitude == 0:
        zeros = np.zeros(2 * nu_max + 1, complex)
        zeros.flags.writeable = False
        return [SpectralSum(rho, nu_max, 0j, 0.0, 0.0, zeros) for rho in rhos]
    rule, E, phases = _oscillation(alpha, math.log(q), nu_max, tol)
    # columns v_rho and conj(v_rho); the negative frequencies are conjugates of E @ conj(v)
    V = np.stack([rule.weights * np.exp(rho * rule.offsets) for rho in rhos], axis=1)
    prod = E @ np.concatenate([V, np.conj(V)], axis=1)
    out = []
    for j, rho in enumerate(rhos):
        base = cmath.exp(rho * rule.center)
        pos = base * phases * prod[:, j]
        neg = base * np.conj(phases) * np.conj(prod[:, len(rhos) + j])
        terms = np.concatenate([neg[:0:-1], pos])
        terms.flags.writeable = False
        pairs = [terms[nu_max]] + list(terms[nu_max + 1 :] + terms[:nu_max][::-1])
        value = _fsum_complex(pairs)
        last = max(abs(terms[0]), abs(terms[-1]))
        quad = (2 * nu_max + 1) * tol * rule.mass(rho.real)
        out.append(SpectralSum(rho, nu_max, value, TAIL_SAFETY * nu_max * last, quad, terms))
    return out


def poisson_oracle(alpha: TestFunction, rho: complex, q: int) -> complex:
    """log q * sum_k exp(rho k log q) alpha(k log q), a finite sum over the support."""
    log_q = math.log(q)
    lo, hi = alpha.support
    ks = range(math.ceil(lo / log_q), math.floor(hi / log_q) + 1)
    return log_q * _fsum_complex([cmath.exp(rho * k * log_q) * alpha(k * log_q) for k in ks] or [0j])


@dataclass(frozen=True)
class CurveData:
    """Input to the verifier: q, genus, zeta zeros and a closed-point census.

    Built from :class:`ZetaData` for elliptic curves, or from several elliptic
    Frobenius traces over the same q for a genus-g plug-in whose point counts
    are q^n + 1 - sum of the factors' t_n.
    """

    q: int
    genus: int
    zeros: tuple[complex, ...]
    census: ClosedPointCensus
    leaf_multiplier: complex | None = None

    @classmethod
    def from_zeta(cls, zd: ZetaData, D: int) -> "CurveData":
        t = trace_powers(zd.q, zd.trace_a, D)
        census = census_from_counts(zd.q, [zd.q**n + 1 - t[n] for n in range(1, D + 1)])
        return cls(zd.q, zd.genus, zd.zero_values, census, zd.xi)

    @classmethod
    def from_elliptic_factors(cls, q: int, traces, D: int) -> "CurveData":
        zeros: list[complex] = []
        counts = [q**n + 1 for n in range(1, D + 1)]
        for a in traces:
            zd = ZetaData(q=q, trace_a=a)
            zeros.extend(zd.zero_values)
            t = trace_powers(q, a, D)
            counts = [c - t[n] for n, c in zip(range(1, D + 1), counts)]
        return cls(q, len(traces), tuple(zeros), census_from_counts(q, counts))

    def with_genus(self, genus: int) -> "CurveData":
        return replace(self, genus=genus)


def _as_curve_data(data, alpha: TestFunction) -> CurveData:
    if isinstance(data, CurveData):
        return data
    return CurveData.from_zeta(data, default_degree(alpha.support, data.q))


@dataclass(frozen=True)
class SpectralSide:
    h0: float
    h1: float
    h2: float
    nu_max: int
    tail_bound: float
    families: tuple[SpectralSum, ...] = field(repr=False)
    signs: tuple[int, ...] = field(repr=False)

    @property
    def alternating(self) -> float:
        return self.h0 - self.h1 + self.h2


def spectral_side(data, alpha: TestFunction, nu_max: int, tol: float = QUADRATURE_TOL) -> SpectralSide:
    cd = _as_curve_data(data, alpha)
    families = tuple(spectral_sums(alpha, [0, *cd.zeros, 1], cd.q, nu_max, tol))
    s0, s1, s2 = families[0], families[1:-1], families[-1]
    # zeros come in conjugate pairs and alpha is real, so h1 is real
    h1 = _fsum_complex([s.value for s in s1] or [0j]).real
    tail = math.fsum(s.tail_bound for s in families)
    signs = (1, *([-1] * len(s1)), 1)
    return SpectralSide(s0.value.real, h1, s2.value.real, nu_max, tail, families, signs)


# ---------------------------------------------------------------------------
# geometric side


def exterior_power_trace(M, j: int) -> float:
    """Tr of the j-th exterior power of M: the sum of its principal j x j minors."""
    from itertools import combinations

    M = np.asarray(M, dtype=float)
    if j == 0:
        return 1.0
    return float(sum(np.linalg.det(M[np.ix_(idx, idx)]) for idx in combinations(range(len(M)), j)))


def _leaf_matrix(jac_leaf) -> np.ndarray:
    if np.ndim(jac_leaf) == 0:
        lam = complex(jac_leaf)
        return np.array([[lam.real, -lam.imag], [lam.imag, lam.real]])
    return np.asarray(jac_leaf, dtype=float)


def guillemin_sternberg_weight(jac_leaf, jac_transversal, direction: str, tol: float = 1e-12) -> Fraction:
    """Local weight of a simple closed orbit in the trace formula.

    The leafwise part is the alternating sum of traces of (D phi)^* on the
    exterior powers divided by |det(id - D phi)|; for a simple fixed point it
    is the sign of det(id - D phi).  The transversal delta contributes
    1 / Jac of v -> (transversal map)(v) - v, which is q^{kd} backwards and 1
    forwards.  ``jac_leaf`` is a complex multiplier or a real matrix.
    """
    if direction not in ("+", "-"):
        raise ValueError("direction must be '+' or '-'")
    jac_t = Fraction(jac_transversal)
    if jac_t <= 0:
        raise ValueError("transversal Jacobian must be positive")
    if direction == "+" and jac_t != 1:
        raise ValueError("forward iterates have transversal Jacobian 1")
    if direction == "-" and jac_t < 1:
        raise ValueError("backward iterates expand the transversal measure")
    M = _leaf_matrix(jac_leaf)
    det = float(np.linalg.det(np.eye(len(M)) - M))
    if abs(det) < tol:
        raise DegenerateFixedPointError("fixed point is not simple: det(id - D phi) = 0")
    alternating = sum((-1) ** j * exterior_power_trace(M, j) for j in range(len(M) + 1))
    sign = round(alternating / abs(det))
    return sign / jac_t


@dataclass(frozen=True)
class OrbitTerm:
    d: int
    k: int
    direction: str
    length: float  # d log q
    weight: Fraction
    alpha_value: float
    contribution: float

    @property
    def position(self) -> float:
        return (self.k if self.direction == "+" else -self.k) * self.length


@dataclass(frozen=True)
class GeometricSide:
    euler_term: float
    orbit_sum: float
    census_used: ClosedPointCensus
    terms: tuple[OrbitTerm, ...] = field(repr=False)

    @property
    def total(self) -> float:
        return self.euler_term + self.orbit_sum

    def term(self, d: int, k: int, direction: str) -> OrbitTerm:
        for t in self.terms:
            if (t.d, t.k, t.direction) == (d, k, direction):
                return t
        raise KeyError((d, k, direction))


def geometric_side(data, alpha: TestFunction) -> GeometricSide:
    """Euler term plus the orbit sum over every iterate k d log q with |k d log q| <= sup |supp alpha|."""
    cd = _as_curve_data(data, alpha)
    q, log_q = cd.q, math.log(cd.q)
    reach = max(abs(alpha.support[0]), abs(alpha.support[1]))
    D = default_degree(alpha.support, q)
    census = cd.census
    if census.max_degree < D:
        raise ValueError(f"census covers degree {census.max_degree} < {D} needed by the support")
    euler = (2 - 2 * cd.genus) * alpha(0.0) * log_q
    terms = []
    for d in range(1, D + 1):
        length = d * log_q
        for k in range(1, math.floor(reach / length) + 1):
            for direction in ("+", "-"):
                if cd.leaf_multiplier is not None:
                    lam = cd.leaf_multiplier ** (k * d if direction == "+" else -k * d)
                else:
                    lam = q ** (-k * d / 2)
                jac_t = 1 if direction == "+" else q ** (k * d)
                weight = guillemin_sternberg_weight(lam, jac_t, direction)
                a_val = alpha(k * length if direction == "+" else -k * length)
                contrib = census.B(d) * length * float(weight) * a_val
                terms.append(OrbitTerm(d, k, direction, length, weight, a_val, contrib))
    orbit_sum = math.fsum(t.contribution for t in terms)
    return GeometricSide(euler, orbit_sum, census, tuple(terms))


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class TraceReport:
    lhs: float
    rhs: float
    residual: float
    tail_bound: float
    poisson_lhs: float
    poisson_residual: float
    passed: bool
    nu_max: int
    per_term: tuple[dict, ...]

    def to_dict(self) -> dict:
        return {
            "lhs": self.lhs,
            "rhs": self.rhs,
            "residual": self.residual,
            "tail_bound": self.tail_bound,
            "poisson_lhs": self.poisson_lhs,
            "poisson_residual": self.poisson_residual,
            "passed": self.passed,
            "nu_max": self.nu_max,
            "per_term": list(self.per_term),
        }


def verify_trace_formula(
    data,
    alpha: TestFunction,
    nu_max: int,
    quadrature_tol: float = QUADRATURE_TOL,
    formula_tol: float = FORMULA_TOL,
) -> TraceReport:
    """Compare h0 - h1 + h2 with the geometric side.

    Passing needs both the truncated spectral sums within tail_bound +
    formula_tol of the geometric side and the truncation-free Poisson form of
    the spectral side within formula_tol (plus a rounding floor proportional
    to the size of the terms).
    """
    cd = _as_curve_data(data, alpha)
    spec = spectral_side(cd, alpha, nu_max, quadrature_tol)
    geo = geometric_side(cd, alpha)
    lhs, rhs = spec.alternating, geo.total
    residual = abs(lhs - rhs)

    per_term = []
    poisson_parts = []
    names = ["theta0"] + [f"theta1[{j}]" for j in range(len(cd.zeros))] + ["theta2"]
    for name, sign, fam in zip(names, spec.signs, spec.families):
        oracle = poisson_oracle(alpha, fam.rho, cd.q)
        poisson_parts.append(sign * oracle)
        per_term.append(
            {
                "term": name,
                "rho": [fam.rho.real, fam.rho.imag],
                "sign": sign,
                "value": [fam.value.real, fam.value.imag],
                "poisson": [oracle.real, oracle.imag],
                "tail_bound": fam.tail_bound,
            }
        )
    per_term.append({"term": "euler", "value": geo.euler_term})
    for t in geo.terms:
        if t.alpha_value != 0.0:
            per_term.append(
                {
                    "term": f"orbit d={t.d} k={t.direction}{t.k}",
                    "position": t.position,
                    "multiplicity": geo.census_used.B(t.d),
                    "weight": str(t.weight),
                    "value": t.contribution,
                }
            )
    poisson_lhs = _fsum_complex(poisson_parts).real
    poisson_residual = abs(poisson_lhs - rhs)
    scale = sum(abs(p) for p in poisson_parts) + sum(abs(t.contribution) for t in geo.terms)
    poisson_ok = poisson_residual <= formula_tol + 64 * _EPS * scale
    passed = residual <= spec.tail_bound + formula_tol and poisson_ok
    return TraceReport(
        lhs, rhs, residual, spec.tail_bound, poisson_lhs, poisson_residual, passed, nu_max, tuple(per_term)
    )


def choose_nu_max(
    data, alpha: TestFunction, target: float = FORMULA_TOL, start: int = 64, cap: int = 1024
) -> int:
    """Smallest nu_max = start * 2^j <= cap whose reported tail bound is below target."""
    nu = start
    while nu < cap:
        if spectral_side(data, alpha, nu).tail_bound <= target:
            return nu
        nu *= 2
    return cap


def convergence_trace(data, alpha: TestFunction, nu_max: int) -> list[tuple[int, float]]:
    """(n, h0 - h1 + h2 truncated at |nu| <= n) for n = 0..nu_max."""
    spec = spectral_side(data, alpha, nu_max)
    total = sum(sign * fam.partial_sums() for sign, fam in zip(spec.signs, spec.families))
    return [(n, float(v.real)) for n, v in enumerate(total)]
