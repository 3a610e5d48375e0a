"""Z_p^m at finite precision: characters, Fourier analysis and the transverse Laplacian.

Everything lives on the finite group G_n = (Z/p^n)^m.  A character is indexed
by k in G_n and pairs with theta as exp(2 pi i sum_j k_j theta_j / p^n); its
j-th component k_j / p^n = sum_{l=1}^{n_j} a_{l,j} p^-l has conductor p^{n_j}.
Functions are dense complex arrays of shape (p^n,)*m.

Fourier convention: u_hat(chi) = p^(-nm) sum_theta u(theta) <chi, theta>, so
that u(theta) = sum_chi u_hat(chi) <chi, -theta> and the indicator of Z_p^m
has u_hat(0) = 1.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "CheckResult",
    "JacobianReport",
    "PAdicAffineMap",
    "PAdicVector",
    "PCharacter",
    "PrecisionError",
    "TransversalFunction",
    "char_norm",
    "conjugate_by_affine",
    "delta_p",
    "fourier",
    "haar_scaling_check",
    "inverse_fourier",
    "jacobian_identities",
    "lab_checks",
    "norm_table",
    "parametrix_multiplier",
    "random_unit_affine",
    "refine",
    "sobolev_norm",
    "valuation",
]

DENSE_LIMIT = 10**6


class PrecisionError(ArithmeticError):
    pass


def valuation(x: int, p: int) -> int | float:
    if x == 0:
        return float("inf")
    v = 0
    while x % p == 0:
        x //= p
        v += 1
    return v


@dataclass(frozen=True)
class PAdicVector:
    p: int
    n: int
    coords: tuple[int, ...]

    def __post_init__(self):
        N = self.p**self.n
        object.__setattr__(self, "coords", tuple(int(c) % N for c in self.coords))

    @property
    def m(self) -> int:
        return len(self.coords)

    def _check(self, other: "PAdicVector"):
        if (self.p, self.n, self.m) != (other.p, other.n, other.m):
            raise ValueError("vectors live in different groups")

    def __add__(self, other):
        self._check(other)
        return PAdicVector(self.p, self.n, tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other):
        self._check(other)
        return PAdicVector(self.p, self.n, tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self):
        return PAdicVector(self.p, self.n, tuple(-a for a in self.coords))


@dataclass(frozen=True)
class PCharacter:
    """Character of Z_p^m; ``digits[j]`` lists a_{1,j}..a_{n_j,j} (a_{n_j,j} != 0)."""

    p: int
    digits: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for row in self.digits:
            if any(not 0 <= a < self.p for a in row):
                raise ValueError("digits must lie in {0..p-1}")
            if row and row[-1] == 0:
                raise ValueError("leading digit a_{n_j,j} must be nonzero")

    @property
    def m(self) -> int:
        return len(self.digits)

    @property
    def exponents(self) -> tuple[int, ...]:
        return tuple(len(row) for row in self.digits)

    @classmethod
    def from_index(cls, k, p: int, n: int) -> "PCharacter":
        rows = []
        for kj in k:
            kj = int(kj) % p**n
            if kj == 0:
                rows.append(())
                continue
            v = valuation(kj, p)
            nj, kk = n - v, kj // p**v
            # kk / p^nj = sum_l a_l p^-l  <=>  kk = sum_l a_l p^(nj - l)
            rows.append(tuple((kk // p ** (nj - l)) % p for l in range(1, nj + 1)))
        return cls(p, tuple(rows))

    def index(self, n: int) -> tuple[int, ...]:
        if max(self.exponents, default=0) > n:
            raise PrecisionError("character conductor exceeds working precision")
        return tuple(
            sum(a * self.p ** (n - l) for l, a in enumerate(row, start=1)) % self.p**n for row in self.digits
        )

    def pairing(self, theta: PAdicVector) -> complex:
        k = self.index(theta.n)
        phase = sum(kj * tj for kj, tj in zip(k, theta.coords)) % theta.p**theta.n
        return complex(np.exp(2j * np.pi * phase / theta.p**theta.n))


def char_norm(chi: PCharacter, variant: str = "conductor") -> float:
    """|chi|: max conductor p^{n_j} over nontrivial coordinates, 0 for the trivial character.

    ``variant="literal"`` gives max |a_{n_j,j}|_p, which is 1 for every
    nontrivial character.
    """
    active = [nj for nj in chi.exponents if nj >= 1]
    if not active:
        return 0.0
    if variant == "conductor":
        return float(chi.p ** max(active))
    if variant == "literal":
        return 1.0
    raise ValueError(f"unknown norm variant {variant!r}")


def norm_table(p: int, n: int, m: int, variant: str = "conductor") -> np.ndarray:
    """|chi| for every character index, shape (p^n,)*m."""
    N = p**n
    per_coord = np.zeros(N)
    for k in range(1, N):
        v = valuation(k, p)
        per_coord[k] = p ** (n - v) if variant == "conductor" else 1.0
    if variant not in ("conductor", "literal"):
        raise ValueError(f"unknown norm variant {variant!r}")
    grids = np.meshgrid(*([per_coord] * m), indexing="ij")
    return np.maximum.reduce(grids) if m > 1 else grids[0]


@dataclass(frozen=True, eq=False)
class TransversalFunction:
    p: int
    n: int
    m: int
    values: np.ndarray

    def __post_init__(self):
        shape = (self.p**self.n,) * self.m
        if self.p ** (self.n * self.m) > DENSE_LIMIT:
            raise ValueError("dense table too large")
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != shape:
            raise ValueError(f"values must have shape {shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_callable(cls, p: int, n: int, m: int, fn) -> "TransversalFunction":
        N = p**n
        vals = np.empty((N,) * m, dtype=complex)
        for theta in itertools.product(range(N), repeat=m):
            vals[theta] = fn(theta)
        return cls(p, n, m, vals)

    @classmethod
    def random(cls, p: int, n: int, m: int, rng: np.random.Generator) -> "TransversalFunction":
        shape = (p**n,) * m
        return cls(p, n, m, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

    @classmethod
    def character(cls, chi_index, p: int, n: int, sign: int = -1) -> "TransversalFunction":
        """theta -> <chi, sign * theta>."""
        N = p**n
        grids = np.meshgrid(*([np.arange(N)] * len(chi_index)), indexing="ij")
        phase = sum(int(k) * g for k, g in zip(chi_index, grids)) % N
        return cls(p, n, len(chi_index), np.exp(sign * 2j * np.pi * phase / N))

    def allclose(self, other: "TransversalFunction", atol: float = 1e-12) -> bool:
        return self.values.shape == other.values.shape and bool(
            np.max(np.abs(self.values - other.values), initial=0.0) <= atol
        )

    def to_json(self) -> str:
        flat = self.values.ravel()
        return json.dumps({"p": self.p, "n": self.n, "m": self.m, "data": [[z.real, z.imag] for z in flat]})

    @classmethod
    def from_json(cls, text: str) -> "TransversalFunction":
        obj = json.loads(text)
        N = obj["p"] ** obj["n"]
        data = np.array([complex(re, im) for re, im in obj["data"]]).reshape((N,) * obj["m"])
        return cls(obj["p"], obj["n"], obj["m"], data)


def fourier(u: TransversalFunction) -> np.ndarray:
    """u_hat indexed by character index k; ``PCharacter.from_index`` names each entry."""
    return np.fft.ifftn(u.values)


def inverse_fourier(u_hat: np.ndarray, p: int, n: int) -> TransversalFunction:
    return TransversalFunction(p, n, u_hat.ndim, np.fft.fftn(u_hat))


def delta_p(u: TransversalFunction, variant: str = "conductor") -> TransversalFunction:
    """Fourier multiplier |chi|^2."""
    weights = norm_table(u.p, u.n, u.m, variant) ** 2
    return inverse_fourier(weights * fourier(u), u.p, u.n)


def sobolev_norm(u: TransversalFunction, k: int, variant: str = "conductor") -> float:
    """(sum_chi (1 + |chi|^2)^k |u_hat(chi)|^2)^(1/2)."""
    weights = (1.0 + norm_table(u.p, u.n, u.m, variant) ** 2) ** k
    return float(np.sqrt(np.sum(weights * np.abs(fourier(u)) ** 2)))


def parametrix_multiplier(norm, lam: float):
    """Fourier multiplier of (1 + Delta_p + lam)^-1 (1 + Delta_p)."""
    norm = np.asarray(norm, dtype=float)
    return (1.0 + norm**2) / (1.0 + norm**2 + lam)


def refine(u: TransversalFunction) -> TransversalFunction:
    """Pull u back along (Z/p^{n+1})^m -> (Z/p^n)^m."""
    N = u.p**u.n
    idx = np.ix_(*([np.arange(u.p * N) % N] * u.m))
    return TransversalFunction(u.p, u.n + 1, u.m, u.values[idx])


# ---------------------------------------------------------------------------
# affine maps


def _det(M) -> int:
    M = [list(r) for r in M]
    size = len(M)
    if size == 1:
        return M[0][0]
    return sum((-1) ** j * M[0][j] * _det([row[:j] + row[j + 1 :] for row in M[1:]]) for j in range(size))


@dataclass(frozen=True)
class PAdicAffineMap:
    """theta -> M theta + B on (Z/p^n)^m, with M an integer lift."""

    p: int
    n: int
    M: tuple[tuple[int, ...], ...]
    B: tuple[int, ...] = ()

    def __post_init__(self):
        m = len(self.M)
        if any(len(r) != m for r in self.M):
            raise ValueError("M must be square")
        object.__setattr__(self, "M", tuple(tuple(int(x) for x in r) for r in self.M))
        object.__setattr__(self, "B", tuple(int(b) % self.p**self.n for b in (self.B or (0,) * m)))

    @property
    def m(self) -> int:
        return len(self.M)

    @property
    def det(self) -> int:
        return _det(self.M)

    @property
    def unit_flag(self) -> bool:
        return self.det % self.p != 0

    @property
    def jacobian_valuation(self) -> int:
        v = valuation(self.det, self.p)
        if v >= self.n:
            raise PrecisionError("det M vanishes at working precision")
        return int(v)

    @property
    def jacobian(self) -> Fraction:
        """|det M|_p."""
        return Fraction(1, self.p**self.jacobian_valuation)

    def matrix(self) -> np.ndarray:
        return np.array(self.M, dtype=np.int64)

    def apply(self, theta: PAdicVector) -> PAdicVector:
        coords = self.matrix() @ np.array(theta.coords, dtype=np.int64) + np.array(self.B)
        return PAdicVector(self.p, self.n, tuple(int(c) for c in coords))

    def transpose_index(self, k) -> tuple[int, ...]:
        """Index of the character theta -> <chi, M theta>."""
        return tuple(int(c) % self.p**self.n for c in self.matrix().T @ np.array(k, dtype=np.int64))

    def transpose_character(self, chi: PCharacter) -> PCharacter:
        return PCharacter.from_index(self.transpose_index(chi.index(self.n)), self.p, self.n)


def random_unit_affine(p: int, n: int, m: int, rng: np.random.Generator) -> PAdicAffineMap:
    N = p**n
    while True:
        M = rng.integers(0, N, size=(m, m))
        if _det(M.tolist()) % p:
            return PAdicAffineMap(p, n, tuple(map(tuple, M.tolist())), tuple(rng.integers(0, N, size=m).tolist()))


def conjugate_by_affine(g: PAdicAffineMap, u: TransversalFunction) -> TransversalFunction:
    """u o g; only unit maps (measure preserving transitions) are accepted."""
    if not g.unit_flag:
        raise ValueError("transition map must have det M a p-adic unit")
    if (g.p, g.n, g.m) != (u.p, u.n, u.m):
        raise ValueError("map and function live on different groups")
    N = u.p**u.n
    grids = np.meshgrid(*([np.arange(N)] * u.m), indexing="ij")
    theta = np.stack([gr.ravel() for gr in grids])
    image = (g.matrix() @ theta + np.array(g.B)[:, None]) % N
    return TransversalFunction(u.p, u.n, u.m, u.values[tuple(image)].reshape(u.values.shape))


def haar_scaling_check(M: PAdicAffineMap, A=None, max_cells: int = DENSE_LIMIT) -> Fraction:
    """mu(M.A) / mu(A) by exact cell counting.

    ``A`` is an iterable of residues mod p^n (tuples), standing for the union
    of their precision-n cells; ``None`` means all of Z_p^m.  The image of a
    cell is a union of cells at precision n + v_p(det M), where it is counted.
    """
    p, n, m = M.p, M.n, M.m
    N = p**n
    cells = np.array(list(itertools.product(range(N), repeat=m)) if A is None else [tuple(a) for a in A])
    if cells.size == 0:
        raise ValueError("A must be non-empty")
    cells = np.unique(cells % N, axis=0)
    e = M.jacobian_valuation
    fine = N * p**e
    if len(cells) * p ** (e * m) > max_cells:
        raise PrecisionError("image needs more cells than max_cells to resolve")
    mat = M.matrix()
    offsets = np.array(list(itertools.product(range(p**e), repeat=m))) * N
    pts = (cells[:, None, :] + offsets[None, :, :]).reshape(-1, m)
    image = (pts @ mat.T + np.array(M.B)) % fine
    count = len(np.unique(image, axis=0))
    return Fraction(count, len(cells) * p ** (e * m))


@dataclass(frozen=True)
class JacobianReport:
    jac_Q: Fraction
    jac_id_minus_Q: Fraction
    expected_jac_Q: Fraction
    ok: bool

    def to_dict(self) -> dict:
        return {
            "jac_Q": str(self.jac_Q),
            "jac_id_minus_Q": str(self.jac_id_minus_Q),
            "expected_jac_Q": str(self.expected_jac_Q),
            "ok": self.ok,
        }


def jacobian_identities(Q: PAdicAffineMap, k: int, q: int) -> JacobianReport:
    """Check |det Q|_p = q^-k and that Id - Q is in GL_m(Z_p).

    ``ok`` is False when the map does not fit the model; that is a property
    of the input, not an error.
    """
    m = Q.m
    id_minus = PAdicAffineMap(Q.p, Q.n, tuple(tuple(int(i == j) - Q.M[i][j] for j in range(m)) for i in range(m)))
    jac_Q, jac_1 = Q.jacobian, id_minus.jacobian
    expected = Fraction(1, q**k)
    return JacobianReport(jac_Q, jac_1, expected, jac_Q == expected and jac_1 == 1)


# ---------------------------------------------------------------------------
# lab


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: dict

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _all_unit_matrices(p: int, n: int, m: int):
    N = p**n
    for entries in itertools.product(range(N), repeat=m * m):
        M = tuple(tuple(entries[i * m : (i + 1) * m]) for i in range(m))
        if _det(M) % p:
            yield M


def lab_checks(p: int, n: int, m: int, seed: int = 0, samples: int = 20, checks=("all",)) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    wanted = set(checks)
    run_all = "all" in wanted
    out: list[CheckResult] = []
    N = p**n

    if run_all or "duality" in wanted:
        err = 0.0
        for _ in range(samples):
            u = TransversalFunction.random(p, n, m, rng)
            err = max(err, float(np.max(np.abs(inverse_fourier(fourier(u), p, n).values - u.values))))
        out.append(CheckResult("duality", err <= 1e-12, {"max_error": err}))

    if run_all or "plancherel" in wanted:
        err = 0.0
        for _ in range(samples):
            u = TransversalFunction.random(p, n, m, rng)
            lhs = float(np.sum(np.abs(u.values) ** 2)) / N**m
            rhs = float(np.sum(np.abs(fourier(u)) ** 2))
            err = max(err, abs(lhs - rhs) / max(lhs, 1e-300))
        out.append(CheckResult("plancherel", err <= 1e-12, {"max_rel_error": err}))

    if run_all or "conductor" in wanted:
        exhaustive = N ** (m * m) <= 10**5
        mats = _all_unit_matrices(p, n, m) if exhaustive else (
            random_unit_affine(p, n, m, rng).M for _ in range(samples)
        )
        bad = checked = 0
        chars = [PCharacter.from_index(k, p, n) for k in itertools.product(range(N), repeat=m)]
        for M in mats:
            g = PAdicAffineMap(p, n, M)
            for chi in chars:
                checked += 1
                bad += char_norm(g.transpose_character(chi)) != char_norm(chi)
        out.append(CheckResult("conductor_invariance", bad == 0, {"pairs": checked, "exhaustive": exhaustive, "violations": bad}))

    if run_all or "delta" in wanted:
        err = 0.0
        for _ in range(samples):
            g = random_unit_affine(p, n, m, rng)
            u = TransversalFunction.random(p, n, m, rng)
            lhs = delta_p(conjugate_by_affine(g, u))
            rhs = conjugate_by_affine(g, delta_p(u))
            err = max(err, float(np.max(np.abs(lhs.values - rhs.values))))
        out.append(CheckResult("delta_invariance", err <= 1e-12, {"max_error": err, "samples": samples}))

    if run_all or "haar" in wanted:
        # diag(p, 1, .., 1) has |det|_p = 1/p
        diag = tuple(tuple((p if i == 0 else 1) * int(i == j) for j in range(m)) for i in range(m))
        ratio = haar_scaling_check(PAdicAffineMap(p, n + 1, diag))
        out.append(CheckResult("haar_scaling", ratio == Fraction(1, p), {"ratio": str(ratio)}))

    if run_all or "jacobian" in wanted:
        Q = PAdicAffineMap(p, n + 1, ((p,),))
        rep = jacobian_identities(Q, 1, p)
        out.append(CheckResult("jacobian", rep.ok, rep.to_dict()))

    return out
