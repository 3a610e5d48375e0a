import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lamtrace.padic import (
    PAdicAffineMap,
    PAdicVector,
    PCharacter,
    PrecisionError,
    TransversalFunction,
    char_norm,
    conjugate_by_affine,
    delta_p,
    fourier,
    haar_scaling_check,
    inverse_fourier,
    jacobian_identities,
    lab_checks,
    norm_table,
    parametrix_multiplier,
    random_unit_affine,
    refine,
    sobolev_norm,
    valuation,
)


def direct_fourier(u: TransversalFunction) -> dict:
    """u_hat(k) = p^-nm sum_theta u(theta) <chi_k, theta>, summed term by term."""
    N = u.p**u.n
    out = {}
    for k in itertools.product(range(N), repeat=u.m):
        acc = 0j
        for theta in itertools.product(range(N), repeat=u.m):
            chi = PCharacter.from_index(k, u.p, u.n)
            acc += u.values[theta] * chi.pairing(PAdicVector(u.p, u.n, theta))
        out[k] = acc / N**u.m
    return out


def brute_image_ratio(M: PAdicAffineMap, cells, extra: int) -> Fraction:
    """Image of cells at precision n, counted at precision n + extra by listing every lift."""
    p, n, m = M.p, M.n, M.m
    fine = p ** (n + extra)
    image = set()
    for c in cells:
        for lift in itertools.product(range(p**extra), repeat=m):
            x = [ci + p**n * li for ci, li in zip(c, lift)]
            image.add(tuple((sum(M.M[i][j] * x[j] for j in range(m)) + M.B[i]) % fine for i in range(m)))
    return Fraction(len(image), len(cells) * p ** (extra * m))


@pytest.mark.parametrize("p,n,m", [(3, 2, 1), (2, 2, 2), (5, 1, 2), (2, 3, 1)])
def test_fourier_against_direct_sum(p, n, m):
    u = TransversalFunction.random(p, n, m, np.random.default_rng(p * 10 + n))
    got = fourier(u)
    for k, v in direct_fourier(u).items():
        assert abs(got[k] - v) <= 1e-12


def test_fourier_examples():
    one = TransversalFunction(3, 2, 1, np.ones(9))
    coeffs = fourier(one)
    assert coeffs[0] == pytest.approx(1) and np.allclose(coeffs[1:], 0)
    u = TransversalFunction.character((4, 7), 3, 2)  # theta -> <chi, -theta>
    coeffs = fourier(u)
    assert coeffs[4, 7] == pytest.approx(1)
    coeffs[4, 7] = 0
    assert np.allclose(coeffs, 0, atol=1e-14)


@pytest.mark.parametrize("p,n,m", [(p, n, m) for p in (2, 3, 5) for n in (1, 2, 3) for m in (1, 2) if p ** (n * m) <= 20000])
def test_duality_and_plancherel(p, n, m):
    rng = np.random.default_rng(p + 7 * n + 31 * m)
    for _ in range(5):
        u = TransversalFunction.random(p, n, m, rng)
        back = inverse_fourier(fourier(u), p, n)
        assert back.allclose(u, atol=1e-12 * max(1.0, float(np.max(np.abs(u.values)))))
        lhs = np.sum(np.abs(u.values) ** 2) / (p**n) ** m
        assert lhs == pytest.approx(np.sum(np.abs(fourier(u)) ** 2), rel=1e-12)


def test_plancherel_hundred_functions_z9():
    rng = np.random.default_rng(100)
    for _ in range(100):
        u = TransversalFunction.random(3, 2, 1, rng)
        brute = direct_fourier(u) if _ < 3 else None
        coeffs = fourier(u)
        assert np.sum(np.abs(u.values) ** 2) / 9 == pytest.approx(np.sum(np.abs(coeffs) ** 2), rel=1e-12)
        if brute:
            assert sum(abs(v) ** 2 for v in brute.values()) == pytest.approx(np.sum(np.abs(coeffs) ** 2), rel=1e-12)


def test_character_digits_and_norm():
    chi = PCharacter.from_index((0,), 5, 2)
    assert chi.digits == ((),) and char_norm(chi) == 0
    for a in range(1, 5):
        chi = PCharacter.from_index((a * 5,), 5, 2)  # a / 5
        assert chi.digits == ((a,),)
        assert char_norm(chi) == 5
        assert char_norm(chi, "literal") == 1
    chi = PCharacter.from_index((7,), 5, 2)  # 7/25 = 1/5 + 2/25
    assert chi.digits == ((1, 2),) and char_norm(chi) == 25
    assert PCharacter.from_index((3, 0), 3, 2).exponents == (1, 0)
    with pytest.raises(ValueError):
        PCharacter(3, ((1, 0),))
    with pytest.raises(PrecisionError):
        PCharacter(3, ((1, 2, 1),)).index(2)


@given(st.sampled_from([2, 3, 5]), st.integers(1, 3), st.data())
@settings(max_examples=60, deadline=None)
def test_character_index_round_trip(p, n, data):
    k = tuple(data.draw(st.integers(0, p**n - 1)) for _ in range(2))
    chi = PCharacter.from_index(k, p, n)
    assert chi.index(n) == k
    # conductor: smallest p^e with chi trivial on p^e Z_p^m
    trivial_at = min(e for e in range(n + 1) if all((kj * p**e) % p**n == 0 for kj in k))
    assert char_norm(chi) == (p**trivial_at if trivial_at else 0)
    # the same character at higher precision has the same digits
    assert PCharacter.from_index(tuple(kj * p for kj in k), p, n + 1) == chi


def test_norm_table_matches_char_norm():
    table = norm_table(3, 2, 2)
    for k in itertools.product(range(9), repeat=2):
        assert table[k] == char_norm(PCharacter.from_index(k, 3, 2))


def test_delta_examples():
    const = TransversalFunction(3, 2, 2, np.full((9, 9), 2.5 + 1j))
    assert np.allclose(delta_p(const).values, 0)
    u = TransversalFunction.character((3,), 3, 2)  # conductor 3
    assert delta_p(u).allclose(TransversalFunction(3, 2, 1, 9 * u.values))
    u = TransversalFunction.character((1,), 3, 2)  # conductor 9
    assert delta_p(u).allclose(TransversalFunction(3, 2, 1, 81 * u.values))
    lit = delta_p(TransversalFunction.character((1,), 3, 2), variant="literal")
    assert lit.allclose(TransversalFunction.character((1,), 3, 2))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_sobolev_bound(k):
    rng = np.random.default_rng(k)
    for _ in range(10):
        u = TransversalFunction.random(2, 3, 2, rng)
        assert sobolev_norm(delta_p(u), k) <= sobolev_norm(u, k + 2) * (1 + 1e-12)


def test_conjugation_identity_and_errors():
    rng = np.random.default_rng(0)
    u = TransversalFunction.random(3, 2, 2, rng)
    ident = PAdicAffineMap(3, 2, ((1, 0), (0, 1)))
    assert conjugate_by_affine(ident, u).allclose(u)
    with pytest.raises(ValueError):
        conjugate_by_affine(PAdicAffineMap(3, 2, ((3, 0), (0, 1))), u)
    with pytest.raises(ValueError):
        conjugate_by_affine(PAdicAffineMap(2, 2, ((1, 0), (0, 1))), u)


def test_conjugation_pointwise():
    rng = np.random.default_rng(1)
    g = random_unit_affine(3, 2, 2, rng)
    u = TransversalFunction.random(3, 2, 2, rng)
    v = conjugate_by_affine(g, u)
    for theta in [(0, 0), (4, 7), (8, 1)]:
        assert v.values[theta] == u.values[g.apply(PAdicVector(3, 2, theta)).coords]


def test_transpose_action_on_pairings():
    rng = np.random.default_rng(2)
    g = random_unit_affine(3, 2, 2, rng)
    lin = PAdicAffineMap(3, 2, g.M)
    for k in [(1, 0), (3, 6), (2, 5)]:
        chi = PCharacter.from_index(k, 3, 2)
        moved = lin.transpose_character(chi)
        for theta in [(1, 2), (5, 8)]:
            t = PAdicVector(3, 2, theta)
            assert moved.pairing(t) == pytest.approx(chi.pairing(lin.apply(t)))


def test_conductor_invariance_gl2_z9_random():
    rng = np.random.default_rng(9)
    for _ in range(10):
        g = random_unit_affine(3, 2, 2, rng)
        for k in itertools.product(range(9), repeat=2):
            chi = PCharacter.from_index(k, 3, 2)
            assert char_norm(g.transpose_character(chi)) == char_norm(chi)


def test_delta_commutes_with_twenty_random_maps():
    rng = np.random.default_rng(20)
    for _ in range(20):
        g = random_unit_affine(3, 2, 2, rng)
        u = TransversalFunction.random(3, 2, 2, rng)
        assert delta_p(conjugate_by_affine(g, u)).allclose(conjugate_by_affine(g, delta_p(u)), atol=1e-12)


def test_haar_examples():
    assert haar_scaling_check(PAdicAffineMap(5, 2, ((1,),))) == 1
    assert haar_scaling_check(PAdicAffineMap(5, 2, ((5,),))) == Fraction(1, 5)
    assert haar_scaling_check(PAdicAffineMap(5, 3, ((25,),))) == Fraction(1, 25)
    with pytest.raises(PrecisionError):
        haar_scaling_check(PAdicAffineMap(5, 2, ((25,),)))
    with pytest.raises(PrecisionError):
        haar_scaling_check(PAdicAffineMap(2, 8, ((4, 0), (0, 4))), max_cells=1000)


@given(st.sampled_from([2, 3]), st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_haar_ratio_equals_abs_det(p, seed):
    rng = np.random.default_rng(seed)
    n = 2
    M = rng.integers(0, p**3, size=(2, 2)).tolist()
    g = PAdicAffineMap(p, n + 1, tuple(map(tuple, M)), tuple(rng.integers(0, p**3, size=2).tolist()))
    try:
        v = g.jacobian_valuation
    except PrecisionError:
        return
    cells = {tuple(int(x) for x in rng.integers(0, p ** (n + 1), size=2)) for _ in range(4)}
    ratio = haar_scaling_check(g, sorted(cells))
    assert ratio == Fraction(1, p**v)
    assert ratio == brute_image_ratio(g, sorted(cells), v)


def test_jacobian_examples():
    rep = jacobian_identities(PAdicAffineMap(3, 3, ((3,),)), 1, 3)
    assert (rep.jac_Q, rep.jac_id_minus_Q, rep.ok) == (Fraction(1, 3), 1, True)
    with pytest.raises(PrecisionError):
        jacobian_identities(PAdicAffineMap(3, 3, ((0,),)), 1, 3)
    zero_id = jacobian_identities(PAdicAffineMap(3, 3, ((3,),)), 2, 3)
    assert not zero_id.ok
    # Q = 0: Id - Q = Id is a unit
    assert PAdicAffineMap(3, 3, ((1,),)).jacobian == 1


@pytest.mark.parametrize("q,a,k", [(5, 1, 1), (5, 1, 2), (7, 3, 2), (3, 1, 3)])
def test_jacobian_on_tate_model(q, a, k):
    # conj(xi) = a - xi acting on Z + Z xi; its k-th power has det q^k
    Abar = np.array([[a, q], [-1, 0]], dtype=object)
    Q = np.linalg.matrix_power(Abar, k)
    rep = jacobian_identities(PAdicAffineMap(q, k + 2, tuple(map(tuple, Q.tolist()))), k, q)
    assert rep.jac_Q == Fraction(1, q**k)
    # det(I - conj(xi)^k) = #E(F_{q^k}); a unit exactly when p does not divide it
    t = [2, a]
    for _ in range(k):
        t.append(a * t[-1] - q * t[-2])
    Nk = q**k + 1 - t[k]
    assert (rep.jac_id_minus_Q == 1) == (Nk % q != 0)
    assert rep.ok == (Nk % q != 0)


def test_refine_compatibility():
    rng = np.random.default_rng(5)
    u = TransversalFunction.random(3, 1, 2, rng)
    fine = refine(u)
    assert fine.n == 2
    coarse_hat, fine_hat = fourier(u), fourier(fine)
    for k in itertools.product(range(9), repeat=2):
        if all(kj % 3 == 0 for kj in k):
            assert fine_hat[k] == pytest.approx(coarse_hat[k[0] // 3, k[1] // 3])
        else:
            assert abs(fine_hat[k]) <= 1e-13
    assert np.allclose(delta_p(fine).values, refine(delta_p(u)).values)


def test_parametrix_multiplier():
    lam = 4.0
    norms = np.array([0.0, 3, 9, 27, 81, 729])
    mult = parametrix_multiplier(norms, lam)
    defect = np.abs(mult - 1)
    assert np.all(np.diff(defect) < 0)
    assert defect[-1] < 1e-5
    assert np.allclose(parametrix_multiplier(norms, 0.0), 1)


def test_json_round_trip_and_validation():
    u = TransversalFunction.random(2, 2, 2, np.random.default_rng(3))
    assert TransversalFunction.from_json(u.to_json()).allclose(u, atol=0)
    with pytest.raises(ValueError):
        TransversalFunction(2, 2, 2, np.zeros(4))
    with pytest.raises(ValueError):
        TransversalFunction(3, 7, 2, np.zeros((3**7, 3**7)))


def test_vectors_and_valuation():
    a = PAdicVector(3, 2, (10, -1))
    assert a.coords == (1, 8)
    assert (a + a).coords == (2, 7) and (a - a).coords == (0, 0) and (-a).coords == (8, 1)
    with pytest.raises(ValueError):
        a + PAdicVector(3, 3, (1, 1))
    assert valuation(54, 3) == 3 and valuation(0, 3) == float("inf")


def test_lab_all_pass():
    for p, n, m in [(2, 2, 2), (3, 2, 2), (5, 1, 2)]:
        results = lab_checks(p, n, m, seed=1)
        assert [r.name for r in results][:2] == ["duality", "plancherel"]
        assert all(r.passed for r in results), [r.to_dict() for r in results]
