"""The eight acceptance criteria as callable checks.

Each ``criterion_N`` returns a :class:`CriterionResult`; the CLI ``accept``
verb and the acceptance tests both run these.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import padic
from .census import closed_point_census, euler_partial_product
from .explicit_formula import (
    TestFunction,
    geometric_side,
    poisson_oracle,
    spectral_sums,
    verify_trace_formula,
)
from .field_curve import CurveSpec, FiniteField, ZetaData, zeta_data, zeta_eval
from .tate import (
    LatticeData,
    one_minus_xi_bijectivity,
    quotient_count,
    quotient_reps,
    standard_lattices,
    tate_haar_ratio,
)

__all__ = ["CRITERIA", "CriterionResult", "all_curves", "run_criteria", "sweep_bumps"]

SWEEP_PRIMES = (5, 7, 11, 13)
SWEEP_NU_MAX = 1024
DOUBLING_LADDER = (64, 128, 256, 512, 1024)
WIDTH_FRACTIONS = (0.08, 0.10, 0.12)
FE_REL_TOL = 1e-10
WEIGHT_SLACK = 1e-12


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0

    def line(self) -> str:
        return f"criterion {self.number} [{self.name}]: {'PASS' if self.passed else 'FAIL'} ({self.seconds:.2f}s)"

    def to_dict(self) -> dict:
        return {
            "number": self.number,
            "name": self.name,
            "passed": self.passed,
            "seconds": round(self.seconds, 3),
            "detail": self.detail,
        }


def all_curves(p: int) -> list[CurveSpec]:
    F = FiniteField(p)
    out = []
    for a4, a6 in itertools.product(range(p), repeat=2):
        if (4 * a4**3 + 27 * a6**2) % p:
            out.append(CurveSpec(F, a4, a6))
    return out


def sweep_bumps(q: int) -> list[TestFunction]:
    """One narrow bump on each of +-m log q, m in {k d : k, d <= 3}."""
    L = math.log(q)
    multiples = sorted({k * d for k in (1, 2, 3) for d in (1, 2, 3)})
    centers = [s * m for m in multiples for s in (1, -1)]
    return [
        TestFunction("bump", c * L, WIDTH_FRACTIONS[i % len(WIDTH_FRACTIONS)] * L, 1.0)
        for i, c in enumerate(centers)
    ]


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@_timed
def criterion_1(primes=SWEEP_PRIMES, nu_max: int = SWEEP_NU_MAX) -> CriterionResult:
    """Trace formula on every curve over F_p with the narrow-bump sweep."""
    checked = failures = 0
    worst = 0.0
    worst_case = None
    for p in primes:
        curves = [(c, zeta_data(c)) for c in all_curves(p)]
        rhos = _sweep_rhos(p, {zd.trace_a for _, zd in curves})
        for alpha in sweep_bumps(p):
            spectral_sums(alpha, rhos, p, nu_max)
            for curve, zd in curves:
                rep = verify_trace_formula(zd, alpha, nu_max)
                checked += 1
                failures += not rep.passed
                slack = rep.residual / (rep.tail_bound + 1e-8)
                if slack >= worst:
                    worst, worst_case = slack, {"curve": curve.to_text(), "alpha": alpha.to_dict(), **_brief(rep)}
    return CriterionResult(
        1,
        "trace formula sweep",
        failures == 0,
        {"checked": checked, "failures": failures, "worst_residual_over_allowance": worst, "worst_case": worst_case},
    )


def _sweep_rhos(q: int, traces) -> list[complex]:
    """0, 1 and every zero of the curves with these traces."""
    rhos = {0j, 1 + 0j}
    for a in traces:
        rhos.update(ZetaData(q=q, trace_a=a).zero_values)
    return sorted(rhos, key=lambda z: (z.real, z.imag))


def _brief(rep) -> dict:
    return {"lhs": rep.lhs, "rhs": rep.rhs, "residual": rep.residual, "tail_bound": rep.tail_bound}


@_timed
def criterion_2(primes=SWEEP_PRIMES, nu_max: int = SWEEP_NU_MAX) -> CriterionResult:
    """Spectral sums against the Poisson oracle, and tail bounds halving under doubling."""
    checked = agree_fail = ratio_fail = 0
    max_ratio = 0.0
    for p in primes:
        rhos = _sweep_rhos(p, {zeta_data(c).trace_a for c in all_curves(p)})
        for alpha in sweep_bumps(p):
            for rho, s in zip(rhos, spectral_sums(alpha, rhos, p, nu_max)):
                oracle = poisson_oracle(alpha, rho, p)
                checked += 1
                agree_fail += int(abs(s.value - oracle) > s.tail_bound)
                bounds = [s.tail_bound_at(n) for n in DOUBLING_LADDER]
                ratios = [b / a for a, b in zip(bounds, bounds[1:])]
                max_ratio = max(max_ratio, *(float(r) for r in ratios))
                ratio_fail += any(r >= 0.5 for r in ratios)
    return CriterionResult(
        2,
        "Poisson oracle and tail decay",
        agree_fail == 0 and ratio_fail == 0,
        {"sums": checked, "disagreements": agree_fail, "ratio_violations": ratio_fail, "max_doubling_ratio": max_ratio},
    )


def random_curves(count: int, seed: int) -> list[CurveSpec]:
    rng = np.random.default_rng(seed)
    fields = [(5, 1), (7, 1), (11, 1), (13, 1), (17, 1), (19, 1), (23, 1), (29, 1), (31, 1), (5, 2), (7, 2)]
    out = []
    while len(out) < count:
        p, f = fields[rng.integers(len(fields))]
        F = FiniteField(p, f)
        a4, a6 = (int(x) for x in rng.integers(0, F.q, size=2))
        try:
            out.append(CurveSpec(F, a4, a6))
        except ValueError:
            continue
    return out


@_timed
def criterion_3(count: int = 200, seed: int = 2024) -> CriterionResult:
    """Every zero on Re s = 1/2 and |xi|^2 = q, exactly."""
    bad = []
    for curve in random_curves(count, seed):
        zd = zeta_data(curve)
        if any(z.re != Fraction(1, 2) for z in zd.zeros) or zd.xi_norm_sq() != zd.q:
            bad.append(curve.to_text())
    return CriterionResult(3, "zeros on the critical line", not bad, {"curves": count, "seed": seed, "violations": bad})


@_timed
def criterion_4(primes=SWEEP_PRIMES) -> CriterionResult:
    """Backward orbit terms are q^-kd times forward ones for an even test function."""
    checked = 0
    bad = []
    for p in primes:
        L = math.log(p)
        alpha = TestFunction("bump", 0.0, 9.5 * L, 1.0)
        traces = sorted({zeta_data(c).trace_a for c in all_curves(p)})
        for a in traces:
            geo = geometric_side(ZetaData(q=p, trace_a=a), alpha)
            for d, k in itertools.product((1, 2, 3), repeat=2):
                plus, minus = geo.term(d, k, "+"), geo.term(d, k, "-")
                factor = Fraction(1, p ** (k * d))
                exact = minus.weight == factor * plus.weight
                ratio_ok = abs(minus.contribution - float(factor) * plus.contribution) <= WEIGHT_SLACK * max(
                    abs(plus.contribution), 1e-300
                )
                checked += 1
                if not (exact and ratio_ok):
                    bad.append({"q": p, "a": a, "d": d, "k": k})
    return CriterionResult(4, "dissymmetry of orbit weights", not bad, {"pairs": checked, "violations": bad})


@_timed
def criterion_5(samples: int = 50, seed: int = 7) -> CriterionResult:
    """Delta_p commutes with unit affine conjugation; conductors are GL_2-invariant."""
    rng = np.random.default_rng(seed)
    max_err = 0.0
    for p in (2, 3):
        for _ in range(samples):
            g = padic.random_unit_affine(p, 2, 2, rng)
            u = padic.TransversalFunction.random(p, 2, 2, rng)
            lhs = padic.delta_p(padic.conjugate_by_affine(g, u))
            rhs = padic.conjugate_by_affine(g, padic.delta_p(u))
            max_err = max(max_err, float(np.max(np.abs(lhs.values - rhs.values))))
    conductor = padic.lab_checks(2, 2, 2, checks=("conductor",))[0]
    passed = max_err <= 1e-12 and conductor.passed and conductor.detail["exhaustive"]
    return CriterionResult(
        5,
        "p-adic Laplacian invariance",
        passed,
        {"samples_per_prime": samples, "max_error": max_err, "conductor": conductor.detail},
    )


def _conjugate_matrix(ld: LatticeData):
    """Matrix of conj(xi) = a - xi on the same basis."""
    A, a = ld.xi_matrix, ld.trace
    return tuple(tuple(a * (i == j) - A[i][j] for j in range(2)) for i in range(2))


@_timed
def criterion_6(nu_top: int = 3, seed: int = 11) -> CriterionResult:
    """Haar scaling on the Tate models by cell counting."""
    rng = np.random.default_rng(seed)
    rows = []
    ok = True
    for name, ld in standard_lattices().items():
        q = ld.q
        p = min(f for f in range(2, q + 1) if q % f == 0)
        Abar = _conjugate_matrix(ld)
        for nu in range(1, nu_top + 1):
            whole = tate_haar_ratio(ld, nu)
            M = Abar
            for _ in range(nu - 1):
                M = tuple(tuple(sum(M[i][k] * Abar[k][j] for k in range(2)) for j in range(2)) for i in range(2))
            # precision nu + 1 keeps det(conj(xi)^nu) = q^nu visible mod p^n
            n = nu + 1
            g = padic.PAdicAffineMap(p, n, M)
            subset = {tuple(int(x) for x in rng.integers(0, p**n, size=2)) for _ in range(5)}
            sub_ratio = padic.haar_scaling_check(g, sorted(subset))
            expected = Fraction(1, q**nu)
            ok &= whole == expected and sub_ratio == expected
            rows.append({"lattice": name, "nu": nu, "tate": str(whole), "padic_cells": str(sub_ratio)})
    return CriterionResult(6, "Haar scaling", ok, {"rows": rows})


@_timed
def criterion_7(limit: int = 10**4) -> CriterionResult:
    """[Gamma : xi^nu Gamma] = q^nu and 1 - xi bijective, for every q^nu <= limit."""
    rows = []
    ok = True
    for name, ld in standard_lattices().items():
        nu = 1
        while ld.q**nu <= limit:
            count = quotient_count(ld, nu)
            enumerated = len(quotient_reps(_xi_power(ld, nu)))
            bij = one_minus_xi_bijectivity(ld, nu)
            good = count == enumerated == ld.q**nu and bij
            ok &= good
            rows.append({"lattice": name, "nu": nu, "index": count, "enumerated": enumerated, "bijective": bij})
            nu += 1
    return CriterionResult(7, "quotient counts and bijectivity", ok, {"rows": rows})


def _xi_power(ld: LatticeData, nu: int):
    M = ((1, 0), (0, 1))
    A = ld.xi_matrix
    for _ in range(nu):
        M = tuple(tuple(sum(M[i][k] * A[k][j] for k in range(2)) for j in range(2)) for i in range(2))
    return M


FE_SIGMAS = (-0.5, 0.25, 0.75, 1.5)
FE_TS = (0.0, 0.37, 1.3, 2.9, 7.1)
EULER_DEGREES = (5, 10, 20, 30)


@_timed
def criterion_8(primes=SWEEP_PRIMES) -> CriterionResult:
    """Functional equation on a 20-point grid and Euler products at s = 2."""
    fe_worst = 0.0
    euler_bad = []
    curves = 0
    for p in primes:
        for curve in all_curves(p):
            zd = zeta_data(curve)
            curves += 1
            for sigma, t in itertools.product(FE_SIGMAS, FE_TS):
                s = complex(sigma, t)
                z1, z2 = zeta_eval(zd, s), zeta_eval(zd, 1 - s)
                fe_worst = max(fe_worst, abs(z1 - z2) / abs(z1))
            target = zeta_eval(zd, 2)
            errors = []
            for D in EULER_DEGREES:
                value, bound = euler_partial_product(closed_point_census(zd, D), 2)
                err = abs(value - target)
                errors.append(err)
                if err > bound + 1e-15 * abs(target):
                    euler_bad.append({"curve": curve.to_text(), "D": D, "error": err, "bound": bound})
            if errors[-1] > errors[0]:
                euler_bad.append({"curve": curve.to_text(), "not_converging": errors})
    return CriterionResult(
        8,
        "functional equation and Euler product",
        fe_worst <= FE_REL_TOL and not euler_bad,
        {"curves": curves, "grid_points": len(FE_SIGMAS) * len(FE_TS), "fe_worst_rel": fe_worst, "euler_violations": euler_bad},
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
}


def run_criteria(numbers=None) -> list[CriterionResult]:
    return [CRITERIA[n]() for n in (numbers or sorted(CRITERIA))]
