import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamtrace.explicit_formula import (
    CurveData,
    DegenerateFixedPointError,
    TestFunction,
    choose_nu_max,
    convergence_trace,
    exterior_power_trace,
    geometric_side,
    guillemin_sternberg_weight,
    parse_alpha,
    phi_transform,
    poisson_oracle,
    spectral_side,
    spectral_sum,
    verify_trace_formula,
)
from lamtrace.field_curve import ZetaData


def trapezoid_phi(alpha: TestFunction, s: complex, points: int = 200001) -> complex:
    """Dense trapezoid rule; spectrally accurate for a smooth compactly supported integrand."""
    lo, hi = alpha.support
    t = np.linspace(lo, hi, points)
    y = alpha(t) * np.exp(s * t)
    return complex(np.sum(y) * (t[1] - t[0]))


L5 = math.log(5)


def test_parse_alpha():
    a = parse_alpha("bump:c=1.6094,w=0.5,A=2")
    assert (a.kind, a.center, a.half_width, a.amplitude) == ("bump", 1.6094, 0.5, 2.0)
    assert parse_alpha("hat:w=1").kind == "hat"
    for bad in ("bump:c=1,z=2", "spline:c=1", "bump:w=-1", "bump:c=abc"):
        with pytest.raises(ValueError):
            parse_alpha(bad)


def test_test_function_shape():
    a = TestFunction("bump", 1.0, 0.5, 3.0)
    assert a(1.0) == pytest.approx(3 * math.exp(-1))
    assert a(1.5) == 0.0 and a(0.4) == 0.0
    assert np.all(a(np.array([1.2, 0.8])) == a(np.array([0.8, 1.2]))[::-1])


@pytest.mark.parametrize("s", [0j, 1 + 0j, complex(0.5, 3.0), complex(0.5, 40.0), complex(1.0, -120.0)])
def test_phi_transform_against_trapezoid(s):
    alpha = TestFunction("bump", L5, 0.3 * L5, 1.0)
    assert abs(phi_transform(alpha, s) - trapezoid_phi(alpha, s)) <= 1e-11


@pytest.mark.parametrize("rho", [0j, 1 + 0j, complex(0.5, 0.6879101761183494)])
def test_spectral_sum_matches_poisson(rho):
    alpha = TestFunction("bump", 2 * L5, 0.1 * L5, 1.0)
    s = spectral_sum(alpha, rho, 5, 512)
    oracle = poisson_oracle(alpha, rho, 5)
    assert abs(s.value - oracle) <= s.tail_bound
    assert s.tail_bound < 1e-5 * max(1.0, abs(oracle))


def test_spectral_terms_against_direct_transform():
    alpha = TestFunction("bump", -L5, 0.1 * L5, 1.0)
    rho = complex(0.5, 0.3)
    s = spectral_sum(alpha, rho, 5, 64)
    for nu in (-64, -7, 0, 3, 64):
        direct = phi_transform(alpha, rho + 2j * math.pi * nu / L5)
        assert abs(s.terms[64 + nu] - direct) <= 1e-12


def test_tail_bound_halves_under_doubling():
    alpha = TestFunction("bump", 3 * L5, 0.1 * L5, 1.0)
    s = spectral_sum(alpha, 0.5 + 0.2j, 5, 1024)
    bounds = [s.tail_bound_at(n) for n in (64, 128, 256, 512, 1024)]
    assert all(b / a < 0.5 for a, b in zip(bounds, bounds[1:]))


def test_partial_sums_end_at_value():
    alpha = TestFunction("bump", L5, 0.2 * L5, 1.0)
    s = spectral_sum(alpha, 1.0, 5, 128)
    assert abs(s.partial_sums()[-1] - s.value) <= 1e-12 * abs(s.value)


def test_zero_amplitude_gives_zero_sides():
    alpha = TestFunction("bump", L5, 0.5, 0.0)
    rep = verify_trace_formula(ZetaData(q=5, trace_a=2), alpha, 64)
    assert rep.lhs == 0.0 and rep.rhs == 0.0 and rep.passed


@pytest.mark.parametrize("q,a", [(5, 2), (7, -4), (11, 0), (13, 7)])
@pytest.mark.parametrize("multiple", [1, -1, 2, -3, 4, -6, 9])
def test_trace_formula_narrow_bumps(q, a, multiple):
    L = math.log(q)
    alpha = TestFunction("bump", multiple * L, 0.1 * L, 1.0)
    rep = verify_trace_formula(ZetaData(q=q, trace_a=a), alpha, 1024)
    assert rep.passed, rep.to_dict()
    assert rep.residual <= rep.tail_bound + 1e-8


@given(
    st.sampled_from([(5, 1), (7, 3), (11, -5), (13, -2)]),
    st.floats(-9.3, 9.3),
    st.floats(0.06, 0.12),
)
@settings(max_examples=25, deadline=None)
def test_trace_formula_random_bumps(curve, center_mult, width_mult):
    q, a = curve
    L = math.log(q)
    alpha = TestFunction("bump", center_mult * L, width_mult * L, 1.0)
    rep = verify_trace_formula(ZetaData(q=q, trace_a=a), alpha, 1024)
    assert rep.passed


def test_poisson_form_holds_for_wide_test_functions():
    # no truncation in the Poisson form, so any width and kind works
    zd = ZetaData(q=7, trace_a=-1)
    for alpha in [TestFunction("bump", 0.3, 8.0, 1.0), TestFunction("hat", -2.0, 5.0, 2.0)]:
        rep = verify_trace_formula(zd, alpha, 64)
        assert rep.poisson_residual <= 1e-8 * max(1.0, abs(rep.rhs))


def test_genus_two_plug_in_uses_euler_term():
    q = 5
    data = CurveData.from_elliptic_factors(q, [1, -2], 4)
    alpha = TestFunction("bump", 0.0, 0.1 * L5, 1.0)
    geo = geometric_side(data, alpha)
    assert geo.euler_term == pytest.approx(-2 * alpha(0.0) * L5)
    assert geo.orbit_sum == 0.0
    rep = verify_trace_formula(data, alpha, 1024)
    assert rep.passed
    assert abs(rep.lhs - geo.euler_term) <= rep.tail_bound + 1e-8


def test_genus_override_breaks_balance():
    # the wrong Euler characteristic must be detected, not absorbed
    zd = ZetaData(q=5, trace_a=1)
    data = CurveData.from_zeta(zd, 2).with_genus(2)
    alpha = TestFunction("bump", 0.0, 0.1 * L5, 1.0)
    assert not verify_trace_formula(data, alpha, 512).passed


def elementary_symmetric(values, j):
    return sum(np.prod(c) for c in itertools.combinations(values, j)) if j else 1.0


@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
@settings(max_examples=40, deadline=None)
def test_exterior_power_trace_is_elementary_symmetric(seed, size):
    M = np.random.default_rng(seed).standard_normal((size, size))
    eig = np.linalg.eigvals(M)
    for j in range(size + 1):
        assert exterior_power_trace(M, j) == pytest.approx(elementary_symmetric(eig, j).real, abs=1e-9)


def test_alternating_sum_is_det_id_minus():
    M = np.array([[0.3, -1.2], [0.7, 0.1]])
    alt = sum((-1) ** j * exterior_power_trace(M, j) for j in range(3))
    assert alt == pytest.approx(np.linalg.det(np.eye(2) - M))


def test_guillemin_sternberg_weights():
    xi = ZetaData(q=5, trace_a=2).xi
    assert guillemin_sternberg_weight(xi, 1, "+") == 1
    assert guillemin_sternberg_weight(1 / xi, 5, "-") == Fraction(1, 5)
    assert guillemin_sternberg_weight(xi**-3, 125, "-") == Fraction(1, 125)
    with pytest.raises(DegenerateFixedPointError):
        guillemin_sternberg_weight(1.0, 1, "+")
    with pytest.raises(ValueError):
        guillemin_sternberg_weight(xi, 5, "+")
    with pytest.raises(ValueError):
        guillemin_sternberg_weight(xi, Fraction(1, 5), "-")
    with pytest.raises(ValueError):
        guillemin_sternberg_weight(xi, 1, "x")


def test_geometric_side_dissymmetry():
    q = 7
    L = math.log(q)
    alpha = TestFunction("bump", 0.0, 9.5 * L, 1.0)
    geo = geometric_side(ZetaData(q=q, trace_a=3), alpha)
    for d, k in itertools.product((1, 2, 3), repeat=2):
        plus, minus = geo.term(d, k, "+"), geo.term(d, k, "-")
        assert minus.weight == Fraction(1, q ** (k * d))
        assert plus.weight == 1
        assert minus.position == -plus.position
        assert minus.contribution == pytest.approx(plus.contribution / q ** (k * d), rel=1e-12)
    with pytest.raises(KeyError):
        geo.term(4, 3, "+")


def test_geometric_side_needs_enough_census():
    alpha = TestFunction("bump", 0.0, 3.5 * L5, 1.0)
    data = CurveData.from_zeta(ZetaData(q=5, trace_a=0), 2)
    with pytest.raises(ValueError):
        geometric_side(data, alpha)


def test_choose_nu_max_and_convergence_trace():
    zd = ZetaData(q=5, trace_a=-1)
    alpha = TestFunction("bump", L5, 0.1 * L5, 1.0)
    nu = choose_nu_max(zd, alpha, target=1e-6)
    assert nu in (64, 128, 256, 512, 1024)
    assert spectral_side(zd, alpha, nu).tail_bound <= 1e-6
    series = convergence_trace(zd, alpha, 256)
    assert series[0][0] == 0 and series[-1][0] == 256
    assert series[-1][1] == pytest.approx(spectral_side(zd, alpha, 256).alternating, abs=1e-9)
