"""Ergodic averages, square functions and transference at desk scale.

Linear maps are square matrices acting on a coordinate space ``V``. Two
element models are used for norms:

* ``V = C^d`` read as the diagonal algebra, a vector ``v`` standing for
  ``diag(v)``;
* ``V = C^(d*d)`` read as M_d through row-major vectorisation.

The model is inferred from the shape of ``x``: a 1-D vector is diagonal, a
square matrix is a full element.
"""

from __future__ import annotations

import itertools
import operator
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import opalg
from .opalg import DomainError, ResourceError, RCInterval, TraceContext

__all__ = [
    "ErgodicError",
    "AverageSpec",
    "FiniteGroupAction",
    "cesaro_average",
    "tuple_average",
    "semigroup_average",
    "SemigroupAverage",
    "exponential_flow",
    "average_sequence",
    "square_function_norm",
    "sup_square_function",
    "SupResult",
    "scalar_oracle_sqfn",
    "ball",
    "ball_average_action",
    "folner_ratio",
    "transference_identity_check",
    "TransferenceResult",
    "cyclic_group",
    "translation_action",
    "random_unitary",
    "sweep",
]

EXHAUSTIVE_CAP = 14
GROUP_CAP = 4096


class ErgodicError(ValueError):
    """Invalid operator input, such as a non-commuting tuple."""


@dataclass(frozen=True)
class AverageSpec:
    """Average kind plus strictly increasing indices."""

    kind: str
    indices: tuple

    def __post_init__(self):
        if self.kind not in ("one-sided", "symmetric", "tuple", "ball", "semigroup"):
            raise DomainError(f"unknown average kind {self.kind!r}")
        idx = tuple(self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise DomainError("indices must be strictly increasing")
        if any(v <= 0 for v in idx):
            raise DomainError("indices must be positive")
        object.__setattr__(self, "indices", idx)


def _square(t):
    t = np.asarray(t, dtype=complex)
    if t.ndim != 2 or t.shape[0] != t.shape[1]:
        raise DomainError(f"expected a square matrix, got shape {t.shape}")
    return t


def cesaro_average(T, n: int, kind: str = "one-sided") -> np.ndarray:
    """``(1/n) sum_{j<n} T^j`` or ``(1/(2n+1)) sum_{|k|<=n} T^k``.

    Examples
    --------
    >>> np.allclose(cesaro_average(np.diag([1.0, -1.0]), 2), np.diag([1.0, 0.0]))
    True
    """
    T = _square(T)
    n = int(n)
    d = T.shape[0]
    if kind == "one-sided":
        if n < 1:
            raise DomainError("n must be positive")
        acc, pw = np.zeros_like(T), np.eye(d, dtype=complex)
        for _ in range(n):
            acc += pw
            pw = pw @ T
        return acc / n
    if kind == "symmetric":
        if n < 0:
            raise DomainError("n must be nonnegative")
        if np.linalg.matrix_rank(T) < d:
            raise ErgodicError("symmetric averages need an invertible operator")
        Ti = np.linalg.inv(T)
        acc = np.eye(d, dtype=complex)
        fwd, bwd = np.eye(d, dtype=complex), np.eye(d, dtype=complex)
        for _ in range(n):
            fwd, bwd = fwd @ T, bwd @ Ti
            acc += fwd + bwd
        return acc / (2 * n + 1)
    raise DomainError(f"unknown kind {kind!r}")


def _check_commuting(Ts, tol=1e-10):
    for a, b in itertools.combinations(range(len(Ts)), 2):
        if np.abs(Ts[a] @ Ts[b] - Ts[b] @ Ts[a]).max() > tol * max(1.0, np.abs(Ts[a]).max() * np.abs(Ts[b]).max()):
            raise ErgodicError(f"operators {a} and {b} do not commute")


def tuple_average(Ts: Sequence, n: int) -> np.ndarray:
    """``n^-d sum_{0<=j_r<n} T_1^j1 ... T_d^jd`` for a commuting tuple."""
    Ts = [_square(t) for t in Ts]
    if not Ts:
        raise DomainError("empty tuple")
    _check_commuting(Ts)
    out = np.eye(Ts[0].shape[0], dtype=complex)
    for t in Ts:
        out = out @ cesaro_average(t, n)
    return out


@dataclass(frozen=True)
class SemigroupAverage:
    average: np.ndarray
    n: int
    residual: float | None


def semigroup_average(alpha: Callable, t: float, k: int, d: int = 1,
                      exact: Callable | None = None) -> SemigroupAverage:
    """Riemann discretisation ``A_n(T_{1/k})`` with ``n = floor(k t)``.

    Parameters
    ----------
    alpha : callable
        ``alpha(s)`` returns the operator at time ``s`` (a tuple of ``d``
        times when ``d > 1``).
    exact : callable, optional
        ``exact(t)`` returns the continuous average ``A_t``; when given the
        max-entry residual is reported.
    """
    n = int(np.floor(k * t + 1e-12))
    if n < 1:
        raise DomainError("k t must be at least 1")
    if d == 1:
        Ts = [np.asarray(alpha(1.0 / k), dtype=complex)]
    else:
        Ts = []
        for r in range(d):
            s = [0.0] * d
            s[r] = 1.0 / k
            Ts.append(np.asarray(alpha(tuple(s)), dtype=complex))
    avg = tuple_average(Ts, n)
    res = None if exact is None else float(np.abs(avg - np.asarray(exact(t))).max())
    return SemigroupAverage(avg, n, res)


def exponential_flow(rates):
    """Diagonal flow ``s -> diag(exp(-rate s))`` and its exact average.

    Returns
    -------
    alpha, exact : callables
    """
    rates = np.atleast_1d(np.asarray(rates, dtype=float))

    def alpha(s):
        return np.diag(np.exp(-rates * s))

    def exact(t):
        with np.errstate(invalid="ignore", divide="ignore"):
            vals = np.where(rates == 0, 1.0, (1 - np.exp(-rates * t)) / (rates * t))
        return np.diag(vals)

    return alpha, exact


# ------------------------------------------------------------ square functions


def _as_elements(vs, x_shape):
    vs = np.asarray(vs)
    if len(x_shape) == 1:
        out = np.zeros(vs.shape[:-1] + (vs.shape[-1], vs.shape[-1]), dtype=complex)
        idx = np.arange(vs.shape[-1])
        out[..., idx, idx] = vs
        return out
    d = x_shape[0]
    return vs.reshape(vs.shape[:-1] + (d, d))


def average_sequence(x, T, n_max: int, kind: str = "one-sided") -> np.ndarray:
    """Rows ``A_n x`` for ``n = 1..n_max`` as coordinate vectors.

    ``T`` is a single matrix, or a list of commuting matrices for the tuple
    average.
    """
    x = np.asarray(x, dtype=complex)
    v = x.reshape(-1)
    if kind == "tuple":
        Ts = [_square(t) for t in T]
        _check_commuting(Ts)
        return np.stack([tuple_average(Ts, n) @ v for n in range(1, n_max + 1)])
    T = _square(T)
    if T.shape[0] != v.size:
        raise DomainError(f"operator of size {T.shape[0]} on a vector of size {v.size}")
    out = []
    if kind == "one-sided":
        acc, pw = np.zeros_like(v), v.copy()
        for n in range(1, n_max + 1):
            acc = acc + pw
            pw = T @ pw
            out.append(acc / n)
    elif kind == "symmetric":
        if np.linalg.matrix_rank(T) < T.shape[0]:
            raise ErgodicError("symmetric averages need an invertible operator")
        Ti = np.linalg.inv(T)
        acc, f, b = v.copy(), v.copy(), v.copy()
        for n in range(1, n_max + 1):
            f, b = T @ f, Ti @ b
            acc = acc + f + b
            out.append(acc / (2 * n + 1))
    else:
        raise DomainError(f"unsupported kind {kind!r}")
    return np.stack(out)


def _diffs(avgs, indices):
    idx = [int(i) - 1 for i in indices]
    return np.stack([avgs[b] - avgs[a] for a, b in zip(idx, idx[1:])])


def square_function_norm(x, T, spec, p: float = 2.0, ctx: TraceContext | None = None):
    """rc norm of the differences ``A_{n_{i+1}} x - A_{n_i} x``.

    ``spec`` is an AverageSpec or a plain index list (one-sided averages).
    Returns an RCInterval when ``p < 2``.
    """
    if not isinstance(spec, AverageSpec):
        spec = AverageSpec("one-sided", tuple(spec))
    if len(spec.indices) < 2:
        raise DomainError("need at least two indices")
    x = np.asarray(x, dtype=complex)
    avgs = average_sequence(x, T, int(max(spec.indices)), spec.kind)
    D = _as_elements(_diffs(avgs, spec.indices), x.shape)
    return opalg.rc_norm(list(D), p, "rc", ctx)


def scalar_oracle_sqfn(eigenvalues, weights, indices, p: float = 2.0) -> float:
    """Independent p = 2 square function for a normal operator.

    ``a_n(t) = (1/n) sum_{k<n} t^k`` is evaluated per eigenvalue ``t`` with
    weight ``w = |x_t|^2`` (times the trace weight).
    """
    if p != 2:
        raise DomainError("the scalar oracle is a p = 2 identity")
    t = np.asarray(eigenvalues, dtype=complex)
    if np.any(np.abs(np.abs(t) - 1) > 1e-12):
        raise DomainError("eigenvalues must be unimodular")
    w = np.asarray(weights, dtype=float)

    def a(n):
        k = np.arange(n)
        return (t[:, None] ** k[None, :]).sum(axis=1) / n

    idx = list(indices)
    total = np.zeros(t.shape)
    for lo, hi in zip(idx, idx[1:]):
        total += np.abs(a(hi) - a(lo)) ** 2
    return float(np.sqrt(np.sum(w * total)))


@dataclass
class SupResult:
    """Supremum of the square function over increasing subsequences.

    ``value`` is exact for ``p >= 2`` in exhaustive mode. For ``p < 2`` it is
    the upper end of ``interval``; ``lower_bound`` marks greedy results.
    """

    value: float
    subsequence: tuple
    interval: tuple
    mode: str
    lower_bound: bool = False


def _pair_grams(D):
    # D[a, b] = A_b - A_a as elements; grams of both sides
    col = np.einsum("abji,abjk->abik", D.conj(), D)
    row = np.einsum("abij,abkj->abik", D, D.conj())
    return col, row


def _subsequences(n_max):
    for mask in range(1, 1 << n_max):
        seq = tuple(i + 1 for i in range(n_max) if mask >> i & 1)
        if len(seq) >= 2:
            yield seq


def _seq_values(col, row, seqs, p, ctx):
    d = col.shape[-1]
    S_col = np.zeros((len(seqs), d, d), complex)
    S_row = np.zeros((len(seqs), d, d), complex)
    for s, seq in enumerate(seqs):
        for a, b in zip(seq, seq[1:]):
            S_col[s] += col[a - 1, b - 1]
            S_row[s] += row[a - 1, b - 1]
    vc = opalg._psd_pnorm(S_col, p, ctx)
    vr = opalg._psd_pnorm(S_row, p, ctx)
    return vc, vr


def sup_square_function(x, T, p: float, n_max: int, mode: str = "exhaustive", kind: str = "one-sided",
                        ctx: TraceContext | None = None, refine: int = 1, restarts: int = 3) -> SupResult:
    """Maximise the square function over increasing subsequences of ``1..n_max``.

    Exhaustive mode scans all ``2^n_max`` subsets. For ``p < 2`` subsets are
    ranked by the cheap upper bound ``min(row, column)`` and the best
    ``refine`` of them get a certified interval; the reported interval is
    ``[best certified lower, max over all upper bounds]``. Greedy mode grows a
    subsequence from each of the ``restarts`` best pairs, and from the full
    sequence, by the best single index insertion or removal until no move
    improves; it is a lower bound.
    """
    n_max = int(n_max)
    if n_max < 2:
        raise DomainError("n_max must be at least 2")
    x = np.asarray(x, dtype=complex)
    avgs = average_sequence(x, T, n_max, kind)
    E = _as_elements(avgs, x.shape)
    D = E[None, :, :, :] - E[:, None, :, :]
    col, row = _pair_grams(D)
    d = E.shape[-1]
    ctx = ctx or TraceContext(d)
    p = float(p)

    def score(vc, vr):
        return np.maximum(vc, vr) if p >= 2 else np.minimum(vc, vr)

    if mode == "exhaustive":
        if n_max > EXHAUSTIVE_CAP:
            raise ResourceError(f"exhaustive search is capped at n_max = {EXHAUSTIVE_CAP}")
        seqs = list(_subsequences(n_max))
        vc, vr = _seq_values(col, row, seqs, p, ctx)
        vals = score(vc, vr)
        order = np.argsort(-vals, kind="stable")
        best = seqs[int(order[0])]
        if p >= 2:
            v = float(vals[order[0]])
            return SupResult(v, best, (v, v), mode)
        lower = 0.0
        top = float(vals[order[0]])
        upper_refined = 0.0
        for s in order[:max(1, refine)]:
            iv = opalg.rc_norm(list(_diffs_elems(E, seqs[int(s)])), p, "rc", ctx)
            if iv.lower > lower:
                lower, best = iv.lower, seqs[int(s)]
            upper_refined = max(upper_refined, iv.upper)
        rest = float(vals[order[max(1, refine)]]) if len(order) > max(1, refine) else 0.0
        upper = max(upper_refined, rest)
        return SupResult(upper, best, (lower, upper), mode)
    if mode != "greedy":
        raise DomainError(f"unknown mode {mode!r}")
    pairs = [(a, b) for a in range(1, n_max + 1) for b in range(a + 1, n_max + 1)]
    vc, vr = _seq_values(col, row, pairs, p, ctx)
    pv = score(vc, vr)
    full = tuple(range(1, n_max + 1))
    fc, fr = _seq_values(col, row, [full], p, ctx)
    starts = [(pairs[int(s)], float(pv[s])) for s in np.argsort(-pv, kind="stable")[:restarts]]
    starts.append((full, float(score(fc, fr)[0])))
    best_val, best_seq = -1.0, None
    for seq, val in starts:
        while True:
            cands = [tuple(sorted(seq + (i,))) for i in range(1, n_max + 1) if i not in seq]
            if len(seq) > 2:
                cands += [tuple(v for v in seq if v != i) for i in seq]
            if not cands:
                break
            cc, cr = _seq_values(col, row, cands, p, ctx)
            cv = score(cc, cr)
            j = int(np.argmax(cv))
            if cv[j] <= val * (1 + 1e-12):
                break
            seq, val = cands[j], float(cv[j])
        if val > best_val:
            best_val, best_seq = val, seq
    return SupResult(best_val, best_seq, (best_val, best_val) if p >= 2 else (0.0, best_val), mode, True)


def _diffs_elems(E, seq):
    return [E[b - 1] - E[a - 1] for a, b in zip(seq, seq[1:])]


# ----------------------------------------------------------------- groups


@dataclass(eq=False)
class FiniteGroupAction:
    """Tabulated finite group acting linearly on a coordinate space.

    Parameters
    ----------
    table : ndarray of int
        ``table[g, h]`` is the index of ``g h``; element 0 need not be the
        identity, it is located from the table.
    generators : sequence of int
        Symmetric generating set ``V``.
    maps : sequence of ndarray
        ``maps[g]`` is the matrix of ``alpha_g``.
    """

    table: np.ndarray
    generators: tuple
    maps: list
    labels: list | None = None
    check: bool = True

    def __post_init__(self):
        self.table = np.asarray(self.table, dtype=np.int64)
        n = self.table.shape[0]
        if n > GROUP_CAP:
            raise ResourceError(f"group of order {n} exceeds the cap {GROUP_CAP}")
        if self.table.shape != (n, n):
            raise DomainError("multiplication table must be square")
        ids = [e for e in range(n) if np.array_equal(self.table[e], np.arange(n))]
        if not ids:
            raise DomainError("table has no identity")
        self.identity = ids[0]
        self.inverse = np.array([int(np.flatnonzero(self.table[g] == self.identity)[0]) for g in range(n)])
        gens = tuple(int(g) for g in self.generators)
        if set(int(self.inverse[g]) for g in gens) != set(gens):
            raise ErgodicError("generating set is not symmetric")
        self.generators = gens
        self.maps = [np.asarray(m, dtype=complex) for m in self.maps]
        if len(self.maps) != n:
            raise DomainError("need one map per group element")
        if self.check and n <= 64:
            for g in range(n):
                for h in range(n):
                    if not np.allclose(self.maps[g] @ self.maps[h], self.maps[self.table[g, h]], atol=1e-10):
                        raise ErgodicError(f"alpha is not a homomorphism at ({g}, {h})")

    @property
    def order(self) -> int:
        return self.table.shape[0]

    def mul(self, g: int, h: int) -> int:
        return int(self.table[g, h])


def cyclic_group(q: int) -> np.ndarray:
    """Multiplication table of Z_q (written additively)."""
    i = np.arange(q)
    return (i[:, None] + i[None, :]) % q


def translation_action(q: int, d: int = 1) -> FiniteGroupAction:
    """Z_q acting on ``l(Z_q) (x) M_d`` by ``(alpha_g F)(h) = F(h + g)``.

    Coordinates are ``F`` flattened from shape ``(q, d, d)``.
    """
    maps = []
    blk = d * d
    for g in range(q):
        shift = np.zeros((q, q))
        for h in range(q):
            shift[h, (h + g) % q] = 1.0
        maps.append(np.kron(shift, np.eye(blk)))
    return FiniteGroupAction(cyclic_group(q), (1 % q, (q - 1) % q), maps)


def ball(action: FiniteGroupAction, n: int) -> list:
    """Elements that are products of 1 to ``n`` generators, sorted.

    For ``n >= 2`` this is the closed word-metric ball of radius ``n``.
    """
    if n < 1:
        raise DomainError("n must be positive")
    cur = set(action.generators)
    out = set(cur)
    for _ in range(n - 1):
        cur = {action.mul(g, v) for g in cur for v in action.generators}
        out |= cur
    return sorted(out)


def ball_average_action(action: FiniteGroupAction, n: int, x) -> np.ndarray:
    """``|V^n|^-1 sum_{g in V^n} alpha_g x``."""
    x = np.asarray(x, dtype=complex)
    v = x.reshape(-1)
    B = ball(action, n)
    out = sum(action.maps[g] @ v for g in B) / len(B)
    return out.reshape(x.shape)


def folner_ratio(F, g, mul: Callable = operator.add) -> float:
    """``|F g symmetric-difference F| / |F|``."""
    F = set(F)
    if not F:
        raise DomainError("F must be nonempty")
    Fg = {mul(f, g) for f in F}
    return len(Fg ^ F) / len(F)


@dataclass(frozen=True)
class TransferenceResult:
    residual: float
    covered: bool


def transference_identity_check(action: FiniteGroupAction, x, r: int, h: int,
                                region=None, p: float = 2.0) -> TransferenceResult:
    """Compare ``alpha_h(A_r x)`` with ``M_r F(h)`` where ``F(g) = 1_region(g) alpha_g x``.

    ``M_r F(h) = |B_r|^-1 sum_{g in B_r} F(h g)``. The identity is exact when
    ``h B_r`` lies inside ``region`` (the whole group by default); otherwise
    the result is flagged as uncovered.
    """
    x = np.asarray(x, dtype=complex)
    v = x.reshape(-1)
    region = set(range(action.order)) if region is None else set(int(g) for g in region)
    B = ball(action, r)
    lhs = action.maps[h] @ (sum(action.maps[g] @ v for g in B) / len(B))
    rhs = np.zeros_like(v)
    for g in B:
        hg = action.mul(h, g)
        if hg in region:
            rhs = rhs + action.maps[hg] @ v
    rhs = rhs / len(B)
    covered = all(action.mul(h, g) in region for g in B)
    diff = np.abs(lhs - rhs)
    res = float(diff.max(initial=0.0)) if np.isinf(p) else float(np.sum(diff ** p) ** (1 / p))
    return TransferenceResult(res, covered)


# ------------------------------------------------------------------ sweeps


def random_unitary(d: int, rng) -> np.ndarray:
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _conjugation_matrix(u):
    # vec_row(u x u*) = (u kron conj(u)) vec_row(x)
    return np.kron(u, u.conj())


def _random_commuting_permutations(d, count, rng):
    # powers of one random d-cycle commute with each other
    perm = rng.permutation(d)
    base = np.eye(d)[perm]
    return [np.linalg.matrix_power(base, int(rng.integers(1, d + 1))) for _ in range(count)]


def sweep(config: dict, progress: Callable | None = None):
    """Uniform-boundedness sweep for square functions of ergodic averages.

    ``config`` keys: ``p`` (list), ``dims`` (list), ``n_max`` (int or list),
    ``trials``, ``seed`` and ``model`` (``"unitary"`` for conjugation by a
    random unitary with symmetric averages on M_d, ``"tuple"`` for a pair of
    commuting permutations with tuple averages on the diagonal algebra).

    Returns
    -------
    rows : list of dict
        ``instance, p, dim, n_max, subsequence, value`` per trial.
    summary : dict
        Empirical maximum of ``sup / ||x||_p`` keyed by ``(p, dim, n_max)``.
    """
    ps = [float(v) for v in config.get("p", [2.0])]
    dims = [int(v) for v in config.get("dims", [2])]
    nm = config.get("n_max", 10)
    n_maxes = [int(v) for v in (nm if isinstance(nm, (list, tuple)) else [nm])]
    trials = int(config.get("trials", 100))
    seed = int(config.get("seed", 0))
    model = config.get("model", "unitary")
    rows = []
    summary = {}
    for dim in dims:
        rng = np.random.default_rng([seed, dim])
        instances = []
        for t in range(trials):
            if model == "unitary":
                T = _conjugation_matrix(random_unitary(dim, rng))
                x = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
                instances.append((T, x, "symmetric"))
            elif model == "tuple":
                Ts = _random_commuting_permutations(dim, 2, rng)
                x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
                instances.append((Ts, x, "tuple"))
            else:
                raise DomainError(f"unknown sweep model {model!r}")
        for p in ps:
            for n_max in n_maxes:
                best = 0.0
                for t, (T, x, kind) in enumerate(instances):
                    res = sup_square_function(x, T, p, n_max, "exhaustive", kind)
                    xn = opalg.schatten_norm(np.diag(x) if x.ndim == 1 else x, p)
                    ratio = res.value / xn
                    best = max(best, ratio)
                    rows.append({"instance": t, "p": p, "dim": dim, "n_max": n_max,
                                 "subsequence": " ".join(map(str, res.subsequence)), "value": ratio})
                summary[(p, dim, n_max)] = best
                if progress:
                    progress(p, dim, n_max, best)
    return rows, summary
