"""Joint N-dilations of commuting convex combinations of isometries.

Given ``n`` families ``T_r = sum_j lambda_{r,j} T_{r,j}`` of isometries on a
finite space ``X``, the dilation space is ``Y = l_p(A^n x [N]^n; X)`` where
``A = [m]^[N]`` is the set of schedules. Blocks of ``Y`` are stored as one
ndarray with axes

    (alpha_n, ..., alpha_1, i_n, ..., i_1, X)

in C order, so the linear block index is mixed-radix with the schedule part
most significant and both parts little-endian in the family index. Schedules
are enumerated lexicographically. ``sigma`` is the cycle ``k -> k + 1 mod N``.
Everything is zero-based in code; docstrings use the same convention.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Sequence

import numpy as np

from .opalg import DomainError, ResourceError, parse_exact

__all__ = [
    "DilationError",
    "DilationResourceError",
    "Schedule",
    "ConvexFamily",
    "DilationSystem",
    "DilationDimensions",
    "DilationReport",
    "enumerate_schedule",
    "schedule_weights",
    "sigma_power",
    "one_var_identity_check",
    "build_dilation",
    "apply_U",
    "verify_joint_dilation",
    "dilation_dimensions",
    "family_from_json",
    "scenario_from_json",
]

SCHEDULE_CAP = 10 ** 6
BLOCK_CAP = 10 ** 7


class DilationError(ValueError):
    """Invalid families or construction failures."""


class DilationResourceError(ResourceError):
    """Requested dilation exceeds the size cap."""

    def __init__(self, message, count):
        super().__init__(message)
        self.count = count


@dataclass(frozen=True)
class Schedule:
    """All maps ``alpha: [N] -> [m]`` in lexicographic order.

    ``alphas[s, k]`` is the value at position ``k`` of schedule ``s``.
    """

    N: int
    m: int
    alphas: np.ndarray = field(repr=False)

    def __len__(self):
        return self.alphas.shape[0]

    def one_based(self) -> list:
        return [tuple(int(v) + 1 for v in a) for a in self.alphas]


def enumerate_schedule(N: int, m: int) -> Schedule:
    """Enumerate ``[m]^[N]`` lexicographically.

    Examples
    --------
    >>> enumerate_schedule(2, 2).one_based()
    [(1, 1), (1, 2), (2, 1), (2, 2)]
    """
    N, m = int(N), int(m)
    if N < 1 or m < 1:
        raise DomainError("N and m must be positive")
    if m ** N > SCHEDULE_CAP:
        raise ResourceError(f"m^N = {m ** N} schedules exceed the cap {SCHEDULE_CAP}")
    alphas = np.array(list(itertools.product(range(m), repeat=N)), dtype=np.int64).reshape(m ** N, N)
    return Schedule(N, m, alphas)


def schedule_weights(schedule: Schedule, lambdas: Sequence):
    """``Lambda(alpha) = prod_k lambda_{alpha(k)}``; exact when ``lambdas`` are Fractions."""
    lam = list(lambdas)
    if all(isinstance(v, Fraction) for v in lam):
        out = []
        for a in schedule.alphas:
            w = Fraction(1)
            for v in a:
                w *= lam[v]
            out.append(w)
        return out
    lam = np.asarray(lam, dtype=float)
    return np.prod(lam[schedule.alphas], axis=1)


def sigma_power(k: int, j: int, N: int) -> int:
    """``sigma^k(j)`` for the cycle ``sigma(j) = j + 1 mod N`` (zero-based)."""
    return (j + k) % N


def _is_exact(a) -> bool:
    return isinstance(a, np.ndarray) and a.dtype == object


def _lp(v, p):
    v = np.abs(np.asarray(v))
    if np.isinf(p):
        return float(v.max(initial=0.0))
    return float(np.sum(v ** p) ** (1.0 / p))


@dataclass(frozen=True, eq=False)
class ConvexFamily:
    """``T = sum_j lambdas[j] ops[j]`` with each ``ops[j]`` an isometry.

    ``lambdas`` may be Fractions together with object arrays of Fractions for
    the exact backend.
    """

    lambdas: tuple
    ops: tuple

    def __post_init__(self):
        lam = tuple(self.lambdas)
        ops = tuple(np.asarray(o) if _is_exact(np.asarray(o)) else np.asarray(o, dtype=complex)
                    for o in self.ops)
        if len(lam) != len(ops) or not lam:
            raise DilationError("need one weight per operator")
        if any(v < 0 or v > 1 for v in lam):
            raise DilationError("weights must lie in [0, 1]")
        total = sum(lam)
        if all(isinstance(v, Fraction) for v in lam):
            if total != 1:
                raise DilationError(f"weights sum to {total}, not 1")
        elif abs(float(total) - 1.0) > 1e-12:
            raise DilationError(f"weights sum to {float(total)}, not 1")
        shapes = {o.shape for o in ops}
        if len(shapes) != 1 or len(next(iter(shapes))) != 2 or ops[0].shape[0] != ops[0].shape[1]:
            raise DilationError("operators must be square of a common size")
        object.__setattr__(self, "lambdas", lam)
        object.__setattr__(self, "ops", ops)

    @property
    def m(self) -> int:
        return len(self.ops)

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    @property
    def exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.lambdas) and all(_is_exact(o) for o in self.ops)

    def combination(self):
        total = None
        for lam, op in zip(self.lambdas, self.ops):
            term = op * lam if self.exact else op * complex(lam)
            total = term if total is None else total + term
        return total

    def check_isometries(self, p: float, seed: int = 0, tol: float = 1e-10) -> None:
        """Check ``||T_j v||_p = ||v||_p`` on the basis and 32 random vectors."""
        rng = np.random.default_rng(seed)
        d = self.dim
        probes = list(np.eye(d)) + [rng.standard_normal(d) + 1j * rng.standard_normal(d) for _ in range(32)]
        for j, op in enumerate(self.ops):
            a = np.asarray(op, dtype=complex)
            for v in probes:
                if abs(_lp(a @ v, p) - _lp(v, p)) > tol * max(1.0, _lp(v, p)):
                    raise DilationError(f"operator {j} is not an isometry of l_{p}")


def _identity_like(a):
    if _is_exact(a):
        d = a.shape[0]
        out = np.empty((d, d), dtype=object)
        for i in range(d):
            for j in range(d):
                out[i, j] = Fraction(int(i == j))
        return out
    return np.eye(a.shape[0], dtype=a.dtype)


def _matpow(a, n):
    out = _identity_like(a)
    for _ in range(n):
        out = out.dot(a)
    return out


def one_var_identity_check(family: ConvexFamily, N: int, n: int):
    """Residual of ``T^n = sum_alpha Lambda(alpha)/N sum_k prod_j T_{alpha(sigma^k(j))}``.

    Products run left to right over ``j = 0..n-1`` and ``k = 0..N-1``. On the
    exact backend the residual is a Fraction and vanishes identically; the
    identity does not require the family members to commute.
    """
    N, n = int(N), int(n)
    if not 0 <= n <= N:
        raise DomainError("need 0 <= n <= N")
    sched = enumerate_schedule(N, family.m)
    if family.exact:
        return _exact_identity_residual(family, sched, n)
    lam = schedule_weights(sched, family.lambdas)
    T = family.combination()
    lhs = _matpow(T, n)
    exact = family.exact
    rhs = None
    for alpha, weight in zip(sched.alphas, lam):
        inner = None
        for k in range(N):
            prod = _identity_like(T)
            for j in range(n):
                prod = prod.dot(family.ops[alpha[sigma_power(k, j, N)]])
            inner = prod if inner is None else inner + prod
        term = inner * (weight / N if exact else complex(weight) / N)
        rhs = term if rhs is None else rhs + term
    diff = lhs - rhs
    if exact:
        return max((abs(v) for v in diff.ravel()), default=Fraction(0))
    return float(np.abs(diff).max(initial=0.0))


@functools.lru_cache(maxsize=64)
def _integer_form(family: ConvexFamily):
    """``(a, L, O, c)`` with ``lambda_j = a_j / L`` and ``ops_j = O_j / c``, all integer."""
    L = math.lcm(*(v.denominator for v in family.lambdas))
    c = math.lcm(*(v.denominator for op in family.ops for v in op.ravel()))
    a = tuple(v.numerator * (L // v.denominator) for v in family.lambdas)
    O = np.array([[[v.numerator * (c // v.denominator) for v in row] for row in op]
                  for op in family.ops], dtype=object)
    return a, L, O, c


def _exact_identity_residual(family: ConvexFamily, sched: Schedule, n: int) -> Fraction:
    """Exact residual with denominators cleared.

    Both sides times ``N L^N c^n`` are integer matrices; the products over
    all schedules are batched in int64 when no entry can overflow.
    """
    N, d = sched.N, family.dim
    a, L, O, c = _integer_form(family)
    B = int(np.abs(O).sum(axis=-1).max())
    bound = max(len(sched) * N * max(a) ** N, N * L ** N) * B ** n * d
    dtype = np.int64 if bound < 2 ** 62 else object
    O = O.astype(dtype)
    eye = np.broadcast_to(np.eye(d, dtype=np.int64).astype(dtype), (len(sched), d, d))
    inner = np.zeros((len(sched), d, d), dtype=dtype)
    for k in range(N):
        prod = eye
        for j in range(n):
            prod = np.matmul(prod, O[sched.alphas[:, sigma_power(k, j, N)]])
        inner = inner + prod
    w = np.array([math.prod(a[v] for v in row) for row in sched.alphas.tolist()], dtype=dtype)
    rhs = np.tensordot(w, inner, axes=1)
    comb = np.tensordot(np.array(a, dtype=dtype), O, axes=1)
    lhs = np.eye(d, dtype=np.int64).astype(dtype)
    for _ in range(n):
        lhs = lhs @ comb
    lhs = lhs * (N * L ** (N - n))
    diff = max(abs(int(v)) for v in (lhs - rhs).ravel())
    return Fraction(diff, N * L ** N * c ** n)


@dataclass(frozen=True)
class DilationDimensions:
    blocks: int
    total: int
    memory_bytes: int
    feasible: bool


def dilation_dimensions(n: int, N: int, m, dimX: int, cap: int = BLOCK_CAP) -> DilationDimensions:
    """Exact block count ``N^n * prod_r m_r^N`` and total dimension.

    ``m`` is an integer shared by all families or a list of per-family sizes.
    ``feasible`` is false when the total dimension exceeds ``cap``.
    """
    ms = [int(m)] * int(n) if np.isscalar(m) else [int(v) for v in m]
    blocks = int(N) ** int(n)
    for mr in ms:
        blocks *= mr ** int(N)
    total = blocks * int(dimX)
    return DilationDimensions(blocks, total, 16 * total, total <= cap)


def _commutator_check(families, tol=1e-12):
    for r, s in itertools.combinations(range(len(families)), 2):
        for a, A in enumerate(families[r].ops):
            for b, B in enumerate(families[s].ops):
                A_, B_ = np.asarray(A, complex), np.asarray(B, complex)
                if np.abs(A_ @ B_ - B_ @ A_).max() > tol:
                    raise DilationError(f"T[{r}][{a}] and T[{s}][{b}] do not commute")


@dataclass(eq=False)
class DilationSystem:
    """Structured operators ``J``, ``Q``, ``U_r`` on ``Y``.

    Attributes
    ----------
    families : list of ConvexFamily
    N : int
    p : float
    schedules : list of Schedule
        One per family.
    weights : list of ndarray
        ``Lambda_r`` per schedule of family ``r``.
    shape : tuple
        Block array shape without the trailing ``X`` axis.
    """

    families: list
    N: int
    p: float
    base_norm: Callable | None = None
    schedules: list = field(init=False)
    weights: list = field(init=False)
    shape: tuple = field(init=False)
    checks: dict = field(init=False, default_factory=dict)

    def __post_init__(self):
        self.n = len(self.families)
        self.schedules = [enumerate_schedule(self.N, f.m) for f in self.families]
        self.weights = [np.asarray(schedule_weights(s, [float(v) for v in f.lambdas]))
                        for s, f in zip(self.schedules, self.families)]
        self.shape = tuple(len(s) for s in reversed(self.schedules)) + (self.N,) * self.n
        self.ops = [[np.asarray(o, dtype=complex) for o in f.ops] for f in self.families]
        self.T = [sum(complex(l) * o for l, o in zip(f.lambdas, ops)) for f, ops in zip(self.families, self.ops)]
        lam = np.ones(())
        for w in reversed(self.weights):
            lam = np.multiply.outer(lam, w)
        lam = lam / float(self.N) ** self.n
        self.block_weight = np.broadcast_to(lam.reshape(lam.shape + (1,) * self.n), self.shape)

    @property
    def q(self) -> float:
        return np.inf if self.p == 1 else self.p / (self.p - 1.0)

    @property
    def dimX(self) -> int:
        return self.families[0].dim

    @property
    def block_count(self) -> int:
        return int(np.prod(self.shape))

    def alpha_axis(self, r: int) -> int:
        return self.n - 1 - r

    def i_axis(self, r: int) -> int:
        return 2 * self.n - 1 - r

    def x_norm(self, v) -> float:
        if self.base_norm is not None:
            return float(self.base_norm(v))
        return _lp(v, self.p)

    def norm(self, y) -> float:
        y = np.asarray(y)
        if self.base_norm is None:
            return _lp(y, self.p)
        per = np.array([self.x_norm(b) for b in y.reshape(-1, y.shape[-1])])
        return _lp(per, self.p)

    def embed(self, x) -> np.ndarray:
        """``J x``: block ``(alpha, i)`` is ``(Lambda(alpha)/N^n)^(1/p) x``."""
        x = np.asarray(x, dtype=complex)
        return (self.block_weight ** (1.0 / self.p))[..., None] * x

    def project(self, y) -> np.ndarray:
        """``Q y = sum (Lambda(alpha)/N^n)^(1/q) y_(alpha,i)``."""
        y = np.asarray(y, dtype=complex)
        w = self.block_weight ** (1.0 / self.q) if np.isfinite(self.q) else np.ones(self.shape)
        axes = tuple(range(2 * self.n))
        return np.tensordot(w, y, axes=(axes, axes))

    def apply_U(self, r: int, y) -> np.ndarray:
        return apply_U(self, r, y)

    def index_map(self, r: int) -> np.ndarray:
        """Source block of each output block under ``U_r`` as linear indices."""
        idx = np.indices(self.shape)
        ax = self.i_axis(r)
        idx[ax] = (idx[ax] + 1) % self.N
        return np.ravel_multi_index(tuple(idx), self.shape).reshape(-1)

    def random_block_vector(self, rng) -> np.ndarray:
        s = self.shape + (self.dimX,)
        return rng.standard_normal(s) + 1j * rng.standard_normal(s)


def apply_U(system: DilationSystem, r: int, y) -> np.ndarray:
    """``(U_r y)_(alpha,i) = T_{r, alpha_r(i_r)} y_(alpha, i with i_r -> sigma(i_r))``.

    Evaluated slice by slice over ``(alpha_r, i_r)``; no matrix on ``Y`` is
    formed.
    """
    y = np.asarray(y, dtype=complex)
    if y.shape != system.shape + (system.dimX,):
        raise DomainError(f"block vector of shape {y.shape}, expected {system.shape + (system.dimX,)}")
    if not 0 <= r < system.n:
        raise DomainError(f"family index {r} out of range")
    a_ax, i_ax = system.alpha_axis(r), system.i_axis(r)
    sched = system.schedules[r].alphas
    ops = system.ops[r]
    N = system.N
    out = np.empty_like(y)
    for a in range(sched.shape[0]):
        for i in range(N):
            src = [slice(None)] * y.ndim
            dst = [slice(None)] * y.ndim
            src[a_ax] = dst[a_ax] = a
            src[i_ax] = sigma_power(1, i, N)
            dst[i_ax] = i
            out[tuple(dst)] = y[tuple(src)] @ ops[sched[a, i]].T
    return out


def build_dilation(families: Sequence[ConvexFamily], N: int, p: float, *, base_norm=None,
                   cap: int = BLOCK_CAP, seed: int = 0, tol: float = 1e-10) -> DilationSystem:
    """Construct the dilation of ``n`` pairwise commuting families.

    Raises
    ------
    DilationError
        Cross-family commutation failure, naming the pair, or a non-isometric
        family member.
    DilationResourceError
        When the total dimension exceeds ``cap``.
    """
    families = list(families)
    if not families:
        raise DilationError("need at least one family")
    if len({f.dim for f in families}) != 1:
        raise DilationError("families act on different spaces")
    p = float(p)
    if not p >= 1:
        raise DomainError("p must be at least 1")
    dims = dilation_dimensions(len(families), N, [f.m for f in families], families[0].dim, cap)
    if not dims.feasible:
        raise DilationResourceError(
            f"dilation needs {dims.blocks} blocks ({dims.total} scalars), above the cap {cap}", dims.blocks)
    _commutator_check(families)
    if base_norm is None:
        for f in families:
            f.check_isometries(p, seed=seed)
    sys = DilationSystem(families, int(N), p, base_norm)
    rng = np.random.default_rng(seed)
    worst = {"J": 0.0, "Q": 0.0, "U": 0.0}
    for _ in range(8):
        x = rng.standard_normal(sys.dimX) + 1j * rng.standard_normal(sys.dimX)
        worst["J"] = max(worst["J"], abs(sys.norm(sys.embed(x)) - sys.x_norm(x)) / sys.x_norm(x))
        y = sys.random_block_vector(rng)
        ny = sys.norm(y)
        worst["Q"] = max(worst["Q"], (sys.x_norm(sys.project(y)) - ny) / ny)
        for r in range(sys.n):
            worst["U"] = max(worst["U"], abs(sys.norm(apply_U(sys, r, y)) - ny) / ny)
    sys.checks = worst
    if worst["J"] > tol or worst["U"] > tol or worst["Q"] > tol:
        raise DilationError(f"structured operator checks failed: {worst}")
    return sys


def _multi_indices(n, N):
    return sorted(j for j in itertools.product(range(N + 1), repeat=n) if sum(j) <= N)


@dataclass
class DilationReport:
    """Per multi-index residuals plus structural checks."""

    records: list
    passed: bool
    isometry: dict
    commutation_residual: float
    index_maps_commute: bool
    dimensions: DilationDimensions

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "records": self.records,
            "isometry": self.isometry,
            "commutation_residual": self.commutation_residual,
            "index_maps_commute": self.index_maps_commute,
            "dimensions": {"blocks": self.dimensions.blocks, "total": self.dimensions.total},
        }


def verify_joint_dilation(system: DilationSystem, x_samples, tol: float | None = None,
                          seed: int = 0, y_samples: int = 8) -> DilationReport:
    """Compare ``T_1^j1 ... T_n^jn x`` with ``Q U_1^j1 ... U_n^jn J x``.

    Every multi-index with ``sum j <= N`` is checked on every sample. The
    default tolerance is ``1e-9 (1 + ||x||)``. Records are sorted by
    multi-index.
    """
    xs = [np.asarray(x, dtype=complex) for x in x_samples]
    if not xs:
        raise DomainError("need at least one sample")
    n = system.n
    records = []
    passed = True
    for jj in _multi_indices(n, system.N):
        worst = 0.0
        ok = True
        for x in xs:
            lhs = x
            for r in reversed(range(n)):
                for _ in range(jj[r]):
                    lhs = system.T[r] @ lhs
            y = system.embed(x)
            for r in reversed(range(n)):
                for _ in range(jj[r]):
                    y = apply_U(system, r, y)
            res = system.x_norm(lhs - system.project(y))
            bound = tol if tol is not None else 1e-9 * (1 + system.x_norm(x))
            ok &= res <= bound
            worst = max(worst, res)
        records.append({"multi_index": list(jj), "residual": worst, "passed": bool(ok)})
        passed &= ok
    rng = np.random.default_rng(seed)
    comm = 0.0
    iso = {"J": 0.0, "Q": 0.0, "U": 0.0}
    maps_ok = True
    for r, s in itertools.combinations(range(n), 2):
        mr, ms = system.index_map(r), system.index_map(s)
        maps_ok &= bool(np.array_equal(mr[ms], ms[mr]))
    for x in xs:
        iso["J"] = max(iso["J"], abs(system.norm(system.embed(x)) - system.x_norm(x)))
    for _ in range(y_samples):
        y = system.random_block_vector(rng)
        ny = system.norm(y)
        iso["Q"] = max(iso["Q"], max(0.0, system.x_norm(system.project(y)) - ny))
        for r in range(n):
            iso["U"] = max(iso["U"], abs(system.norm(apply_U(system, r, y)) - ny))
        for r, s in itertools.combinations(range(n), 2):
            d = apply_U(system, r, apply_U(system, s, y)) - apply_U(system, s, apply_U(system, r, y))
            comm = max(comm, float(np.abs(d).max()))
    passed &= maps_ok
    dims = dilation_dimensions(n, system.N, [f.m for f in system.families], system.dimX)
    return DilationReport(records, bool(passed), iso, comm, maps_ok, dims)


# ------------------------------------------------------------------ JSON


def _matrix(obj, exact):
    from .opalg import element_from_json

    if isinstance(obj, dict):
        if exact:
            return element_from_json(obj, exact=True)[0]
        return element_from_json(obj).entries
    rows = obj
    if exact:
        return np.array([[parse_exact(v) for v in row] for row in rows], dtype=object)
    return np.array([[float(parse_exact(v)) for v in row] for row in rows], dtype=complex)


def family_from_json(obj: dict, exact: bool = False) -> ConvexFamily:
    """``{"lambdas": [...], "ops": [matrix, ...]}`` with decimal or fraction strings."""
    try:
        lam = [parse_exact(v) for v in obj["lambdas"]]
        ops = [_matrix(o, exact) for o in obj["ops"]]
    except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise DomainError(f"malformed family: {exc}") from exc
    if not exact:
        lam = [float(v) for v in lam]
    return ConvexFamily(tuple(lam), tuple(ops))


def scenario_from_json(obj: dict) -> dict:
    """Parse a dilation scenario: families, ``N``, ``p`` and samples or a seed."""
    if not isinstance(obj, dict) or "families" not in obj:
        raise DomainError("scenario needs a 'families' list")
    fams = [family_from_json(f) for f in obj["families"]]
    N = int(obj.get("N", 1))
    p = float(obj.get("p", 2))
    seed = int(obj.get("seed", 0))
    if "samples" in obj:
        samples = [np.asarray(s, dtype=complex) for s in obj["samples"]]
    else:
        rng = np.random.default_rng(seed)
        d = fams[0].dim
        samples = [rng.standard_normal(d) + 1j * rng.standard_normal(d)
                   for _ in range(int(obj.get("n_samples", 4)))]
    return {"families": fams, "N": N, "p": p, "samples": samples, "seed": seed}
