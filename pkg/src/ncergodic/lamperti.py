"""Lamperti operators on finite algebras.

Two concrete models are supported:

* the diagonal (commutative) algebra of ``d`` points, where a Lamperti map is
  a weighted point permutation ``T f(i) = w_i b_i f(pi(i))``;
* the full matrix algebra M_d, where ``J`` is conjugation ``x -> u x u*`` or
  transpose-conjugation ``x -> u x^T u*`` by a unitary ``u``.

Elements are always stored as ``d x d`` matrices; on the diagonal algebra only
their diagonals carry information. Indices are zero-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .opalg import (
    DimensionError,
    DomainError,
    TraceContext,
    as_array,
    map_matrix,
    schatten_norm,
    support_projection,
)

__all__ = [
    "LampertiError",
    "JordanDescriptor",
    "LampertiOperator",
    "ModulusPower",
    "LampertiCheck",
    "make_lamperti",
    "weighted_permutation",
    "is_lamperti",
    "lamperti_decompose",
    "lamperti_modulus",
    "lamperti_compose",
    "lamperti_power_mu",
    "operator_pnorm",
    "weighted_permutation_norm",
    "lamperti_from_json",
    "lamperti_to_json",
]

KINDS = ("conjugation", "transpose-conjugation", "point-permutation")


class LampertiError(ValueError):
    """A triple (w, b, J) or a map violates the Lamperti structure."""


def _is_unitary(u, tol=1e-9):
    return np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=tol)


@dataclass(frozen=True, eq=False)
class JordanDescriptor:
    """Jordan *-homomorphism of one of the supported kinds.

    Parameters
    ----------
    kind : {"conjugation", "transpose-conjugation", "point-permutation"}
    u : ndarray, optional
        Unitary for the conjugation kinds.
    pi : tuple of int, optional
        Permutation for the point kind: ``J(f)(i) = f(pi[i])``.
    support : tuple of bool, optional
        Points where ``J(1)`` is one; defaults to all points.
    """

    kind: str
    u: np.ndarray | None = None
    pi: tuple | None = None
    support: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise LampertiError(f"unknown Jordan kind {self.kind!r}")
        if self.kind == "point-permutation":
            pi = tuple(int(i) for i in self.pi)
            if sorted(pi) != list(range(len(pi))):
                raise LampertiError(f"{pi} is not a permutation")
            sup = (True,) * len(pi) if self.support is None else tuple(bool(s) for s in self.support)
            if len(sup) != len(pi):
                raise DimensionError("support mask and permutation differ in length")
            object.__setattr__(self, "pi", pi)
            object.__setattr__(self, "support", sup)
        else:
            u = np.array(self.u, dtype=complex)
            if u.ndim != 2 or u.shape[0] != u.shape[1] or not _is_unitary(u):
                raise LampertiError("conjugation kinds need a unitary u")
            object.__setattr__(self, "u", u)

    @classmethod
    def identity(cls, d: int, kind: str = "conjugation") -> "JordanDescriptor":
        if kind == "point-permutation":
            return cls(kind, pi=tuple(range(d)))
        return cls(kind, u=np.eye(d))

    @property
    def dim(self) -> int:
        return len(self.pi) if self.kind == "point-permutation" else self.u.shape[0]

    @property
    def is_multiplicative(self) -> bool:
        return self.kind != "transpose-conjugation"

    def partial_permutation(self) -> np.ndarray:
        """Matrix ``P`` with ``J(x) = P x P^T`` for the point kind."""
        d = self.dim
        p = np.zeros((d, d))
        for i, (j, s) in enumerate(zip(self.pi, self.support)):
            if s:
                p[i, j] = 1.0
        return p

    def __call__(self, x) -> np.ndarray:
        a = as_array(x)
        if self.kind == "point-permutation":
            p = self.partial_permutation()
            return p @ a @ p.T
        if self.kind == "transpose-conjugation":
            a = a.T
        return self.u @ a @ self.u.conj().T

    def unit(self) -> np.ndarray:
        return self(np.eye(self.dim))

    def compose(self, inner: "JordanDescriptor") -> "JordanDescriptor":
        """Return the descriptor of ``self o inner``."""
        if (self.kind == "point-permutation") != (inner.kind == "point-permutation"):
            raise LampertiError("cannot compose point and matrix Jordan maps")
        if self.kind == "point-permutation":
            pi = tuple(inner.pi[self.pi[i]] for i in range(self.dim))
            sup = tuple(self.support[i] and inner.support[self.pi[i]] for i in range(self.dim))
            return JordanDescriptor(self.kind, pi=pi, support=sup)
        v = inner.u if self.kind == "conjugation" else inner.u.conj()
        same = self.kind == inner.kind
        return JordanDescriptor("conjugation" if same else "transpose-conjugation", u=self.u @ v)

    def equals(self, other: "JordanDescriptor", tol: float = 0.0) -> bool:
        """Equality as maps, checked on matrix units."""
        if self.dim != other.dim:
            return False
        if self.kind == other.kind == "point-permutation":
            return self.pi == other.pi and self.support == other.support
        return bool(np.allclose(self.matrix(), other.matrix(), atol=tol, rtol=0))

    def matrix(self) -> np.ndarray:
        return map_matrix(self, self.dim)


class ModulusPower(NamedTuple):
    """Exponent data ``mu = p / gamma``."""

    mu: float
    gamma: float
    p: float

    @classmethod
    def from_p_gamma(cls, p: float, gamma: float) -> "ModulusPower":
        if p < 1 or gamma < 1:
            raise DomainError("p and gamma must be at least 1")
        return cls(p / gamma, gamma, p)


@dataclass(frozen=True, eq=False)
class LampertiOperator:
    """``T(x) = w b J(x)`` with validated parts."""

    ctx: TraceContext
    w: np.ndarray
    b: np.ndarray
    J: JordanDescriptor

    @property
    def dim(self) -> int:
        return self.ctx.dim

    @property
    def algebra(self) -> str:
        return "diagonal" if self.J.kind == "point-permutation" else "full"

    def __call__(self, x) -> np.ndarray:
        return self.w @ self.b @ self.J(x)

    apply = __call__

    def matrix(self) -> np.ndarray:
        """``d^2 x d^2`` matrix on row-major vectorised elements."""
        return map_matrix(self, self.dim)

    def diagonal_matrix(self) -> np.ndarray:
        """``d x d`` matrix of the restriction to the diagonal algebra."""
        d = self.dim
        cols = [np.diag(self(np.diag(np.eye(d)[j]))) for j in range(d)]
        return np.stack(cols, axis=1)

    @property
    def is_positive(self) -> bool:
        return bool(np.allclose(self.w, support_projection(self.b), atol=1e-9))


def _spectral_projections(b, tol=1e-9):
    vals, vecs = np.linalg.eigh((b + b.conj().T) / 2)
    out, i = [], 0
    while i < len(vals):
        j = i
        while j + 1 < len(vals) and abs(vals[j + 1] - vals[i]) <= tol * max(1.0, abs(vals[i])):
            j += 1
        v = vecs[:, i:j + 1]
        out.append(v @ v.conj().T)
        i = j + 1
    return out


def make_lamperti(w, b, J: JordanDescriptor, ctx: TraceContext | None = None,
                  tol: float = 1e-9) -> LampertiOperator:
    """Validate and build ``T = w b J``.

    Raises
    ------
    LampertiError
        Naming the support condition when ``w* w``, ``J(1)`` and ``s(b)``
        disagree, or the commutation condition when a spectral projection of
        ``b`` fails to commute with ``J``.
    """
    w = as_array(w)
    b = as_array(b)
    d = J.dim
    ctx = ctx or TraceContext(d)
    if w.shape != (d, d) or b.shape != (d, d) or ctx.dim != d:
        raise DimensionError("w, b and J act on different dimensions")
    if not np.allclose(b, b.conj().T, atol=tol) or np.linalg.eigvalsh((b + b.conj().T) / 2).min() < -tol:
        raise LampertiError("support condition: b must be positive")
    sb = support_projection(b)
    j1 = J.unit()
    if not np.allclose(w.conj().T @ w, j1, atol=tol):
        raise LampertiError("support condition: w* w differs from J(1)")
    if not np.allclose(j1, sb, atol=tol):
        raise LampertiError("support condition: J(1) differs from the support of b")
    if J.kind == "point-permutation":
        units = [np.diag(np.eye(d)[i]) for i in range(d)]
        if not (np.allclose(b, np.diag(np.diag(b)), atol=tol) and np.allclose(w, np.diag(np.diag(w)), atol=tol)):
            raise LampertiError("commutation condition: w and b must be diagonal on the diagonal algebra")
    else:
        units = [np.outer(np.eye(d)[i], np.eye(d)[j]) for i in range(d) for j in range(d)]
    for e in _spectral_projections(b):
        for x in units:
            jx = J(x)
            if not np.allclose(e @ jx, jx @ e, atol=tol):
                raise LampertiError("commutation condition: a spectral projection of b does not commute with J")
    return LampertiOperator(ctx, w.copy(), b.copy(), J)


def weighted_permutation(b, pi, phases=None, ctx: TraceContext | None = None) -> LampertiOperator:
    """Weighted point permutation ``T f(i) = phase_i b_i f(pi[i])``.

    Zero weights switch the point off (``J(1)`` drops there).
    """
    b = np.asarray(b, dtype=float)
    ph = np.ones(len(b), complex) if phases is None else np.asarray(phases, complex)
    on = b > 0
    ph = np.where(on, ph, 0)
    J = JordanDescriptor("point-permutation", pi=tuple(pi), support=tuple(on))
    return make_lamperti(np.diag(ph), np.diag(b).astype(complex), J, ctx)


class LampertiCheck(NamedTuple):
    ok: bool
    witness: tuple | None
    pairs_checked: int

    def __bool__(self):
        return self.ok


def _as_callable(T, d):
    if isinstance(T, LampertiOperator):
        return T
    if callable(T):
        return lambda x: np.asarray(T(x))
    m = np.asarray(T)
    if m.shape == (d * d, d * d):
        return lambda x: (m @ as_array(x).reshape(-1)).reshape(d, d)
    if m.shape == (d, d):
        return lambda x: np.diag(m @ np.diag(as_array(x)))
    raise DimensionError(f"map of shape {m.shape} does not act on dim {d}")


def _random_unitary(d, rng):
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def is_lamperti(T, dim: int, budget: int = 64, algebra: str | None = None, strict: bool = False,
                seed: int = 0, tol: float = 1e-9) -> LampertiCheck:
    """Test the disjointness-preserving property on projection pairs.

    Diagonal pairs ``(E_ii, E_jj)`` are tried first, then ``budget`` random
    pairs of orthogonal projections (full algebra only). On the diagonal
    algebra the singleton pairs already decide the property, since both
    products are bilinear and disjoint diagonal projections are sums of
    disjoint singletons. ``strict`` adds every rank-one pair from a random
    orthonormal basis. ``algebra`` defaults to the operator's own algebra
    for a :class:`LampertiOperator` and to ``"full"`` otherwise.

    Returns
    -------
    LampertiCheck
        ``ok`` flag, the first violating ``(e, f)`` pair if any, and the
        number of pairs examined.
    """
    d = int(dim)
    if algebra is None:
        algebra = T.algebra if isinstance(T, LampertiOperator) else "full"
    f = _as_callable(T, d)
    count = 0
    scale = 1.0

    def bad(e, g):
        nonlocal count
        count += 1
        te, tg = f(e), f(g)
        s = max(scale, np.abs(te).max(initial=0.0) * np.abs(tg).max(initial=0.0))
        return (np.abs(te.conj().T @ tg).max() > tol * s) or (np.abs(te @ tg.conj().T).max() > tol * s)

    eye = np.eye(d)
    for i in range(d):
        for j in range(i + 1, d):
            e, g = np.diag(eye[i]).astype(complex), np.diag(eye[j]).astype(complex)
            if bad(e, g):
                return LampertiCheck(False, (e, g), count)
    if algebra == "diagonal":
        return LampertiCheck(True, None, count)
    rng = np.random.default_rng(seed)
    for _ in range(budget if d > 1 else 0):
        u = _random_unitary(d, rng)
        perm = rng.permutation(d)
        k = int(rng.integers(1, d))
        a, c = u[:, perm[:k]], u[:, perm[k:]]
        e, g = a @ a.conj().T, c @ c.conj().T
        if bad(e, g):
            return LampertiCheck(False, (e, g), count)
    if strict:
        u = _random_unitary(d, rng)
        for i in range(d):
            for j in range(i + 1, d):
                e = np.outer(u[:, i], u[:, i].conj())
                g = np.outer(u[:, j], u[:, j].conj())
                if bad(e, g):
                    return LampertiCheck(False, (e, g), count)
    return LampertiCheck(True, None, count)


def lamperti_decompose(T, dim: int, ctx: TraceContext | None = None, tol: float = 1e-10) -> LampertiOperator:
    """Decompose a weighted point permutation on the diagonal algebra.

    Each indicator ``e_j`` must map to ``c_j e_i`` for a single output point
    ``i``; then ``pi[i] = j``, ``w_ii`` is the phase of ``c_j`` (zero when
    ``c_j = 0``) and ``b_ii = |c_j|``. Output points that receive nothing are
    switched off in ``J``.
    """
    d = int(dim)
    f = _as_callable(T, d)
    w = np.zeros(d, complex)
    b = np.zeros(d)
    pi = [-1] * d
    used = set()
    for j in range(d):
        img = np.asarray(f(np.diag(np.eye(d)[j]).astype(complex)))
        if np.abs(img - np.diag(np.diag(img))).max(initial=0.0) > tol:
            raise LampertiError(f"T(e_{j}) leaves the diagonal algebra")
        col = np.diag(img)
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size == 0:
            continue
        if nz.size > 1:
            raise LampertiError(f"T(e_{j}) is not a multiple of an indicator")
        i = int(nz[0])
        if pi[i] != -1:
            raise LampertiError(f"two indicators map onto point {i}")
        c = col[i]
        pi[i] = j
        used.add(j)
        w[i] = c / abs(c)
        b[i] = abs(c)
    free = iter(j for j in range(d) if j not in used)
    support = [p != -1 for p in pi]
    pi = [p if p != -1 else next(free) for p in pi]
    J = JordanDescriptor("point-permutation", pi=tuple(pi), support=tuple(support))
    return make_lamperti(np.diag(w), np.diag(b).astype(complex), J, ctx or TraceContext(d))


def lamperti_modulus(T: LampertiOperator) -> LampertiOperator:
    """``|T| = s(b) b J``, a positive Lamperti operator."""
    return LampertiOperator(T.ctx, support_projection(T.b), T.b.copy(), T.J)


def _polar_isometry(m, tol=1e-10):
    u, s, vh = np.linalg.svd(m)
    keep = s > tol * max(s.max(initial=0.0), 1e-300)
    return u[:, keep] @ vh[keep]


def lamperti_compose(S: LampertiOperator, T: LampertiOperator, tol: float = 1e-10) -> LampertiOperator:
    """Lamperti decomposition of ``S o T``.

    The positive part is ``b_S J_S(b_T)``, the Jordan part ``J_S o J_T`` and
    the partial isometry is the polar part of ``(S o T)(1)``. Both factors
    must have invertible ``b``.
    """
    if S.ctx != T.ctx:
        raise DimensionError("operators live on different trace contexts")
    for name, op in (("S", S), ("T", T)):
        if np.linalg.matrix_rank(op.b, tol=tol) < op.dim:
            raise LampertiError(f"{name} is not invertible: b lacks full support")
    J = S.J.compose(T.J)
    b = S.b @ S.J(T.b)
    if not np.allclose(b, b.conj().T, atol=tol):
        raise LampertiError("b_S J_S(b_T) is not positive; composition leaves the class")
    b = (b + b.conj().T) / 2
    # both weights are invertible, so only round-off singular values are dropped
    w = _polar_isometry(S(T(np.eye(S.dim))), tol=S.dim * np.finfo(float).eps)
    out = LampertiOperator(S.ctx, w, b, J)
    d = S.dim
    units = ([np.diag(np.eye(d)[i]) for i in range(d)] if J.kind == "point-permutation"
             else [np.outer(np.eye(d)[i], np.eye(d)[j]) for i in range(d) for j in range(d)])
    for x in units:
        ref = S(T(x))
        if not np.allclose(out(x), ref, atol=tol * 10 * max(1.0, np.abs(ref).max())):
            raise LampertiError("composition leaves the supported class")
    return out


def lamperti_power_mu(T: LampertiOperator, mp) -> LampertiOperator:
    """``T^(mu)(x) = b^mu J(x)`` for a positive Lamperti operator."""
    mu = mp.mu if isinstance(mp, ModulusPower) else float(mp)
    if mu <= 0:
        raise DomainError("mu must be positive")
    if not T.is_positive:
        raise DomainError("mu-powers are defined for positive Lamperti operators")
    vals, vecs = np.linalg.eigh((T.b + T.b.conj().T) / 2)
    vals = np.clip(vals, 0.0, None)
    bm = (vecs * np.where(vals > 0, vals ** mu, 0.0)) @ vecs.conj().T
    return LampertiOperator(T.ctx, support_projection(T.b), bm, T.J)


# --------------------------------------------------------------- norms


def weighted_permutation_norm(T: LampertiOperator, p: float) -> float:
    """Closed form ``max_i b_i (nu_i / nu_pi(i))^(1/p)`` on the diagonal algebra."""
    if T.algebra != "diagonal":
        raise DomainError("closed form holds for weighted point permutations only")
    b = np.real(np.diag(T.b))
    nu = T.ctx.w
    ratio = nu / nu[list(T.J.pi)]
    if np.isinf(p):
        return float(b.max(initial=0.0))
    return float(np.max(b * ratio ** (1.0 / p), initial=0.0))


def _lp_vec(v, p, nu):
    if np.isinf(p):
        return float(np.abs(v).max(initial=0.0))
    return float(np.sum(nu * np.abs(v) ** p) ** (1.0 / p))


def _phase_power(v, e):
    """``sign(v) |v|^e`` up to a positive factor (callers renormalise)."""
    a = np.abs(v)
    top = a.max(initial=0.0)
    if top == 0:
        return np.zeros_like(v)
    a = a / top
    keep = a > 1e-150
    safe = np.where(keep, a, 1.0)
    return np.where(keep, (v / top) / safe * safe ** e, 0)


def _col_pnorms(v, p):
    return (np.abs(v) ** p).sum(axis=0) ** (1.0 / p)


def _col_phase_power(v, e):
    """Column-wise ``sign(v) |v|^e`` up to positive per-column factors."""
    a = np.abs(v)
    top = a.max(axis=0, keepdims=True)
    top = np.where(top > 0, top, 1.0)
    a = a / top
    keep = a > 1e-150
    safe = np.where(keep, a, 1.0)
    return np.where(keep, (v / top) / safe * safe ** e, 0)


def _diag_pnorm(a, p, nu, iterations, rng):
    d = a.shape[0]
    if p == 1:
        return float(np.max((nu[:, None] * np.abs(a)).sum(0) / nu, initial=0.0))
    if np.isinf(p):
        return float(np.abs(a).sum(1).max(initial=0.0))
    # conjugate to the unweighted l_p norm
    s = nu ** (1.0 / p)
    bmat = s[:, None] * a / s[None, :]
    q = p / (p - 1.0)
    # all starts iterate together; the values are nondecreasing, so stop
    # once no column improves (a cycling iterate is already at its value)
    X = np.concatenate([np.eye(d, dtype=complex),
                        rng.standard_normal((d, iterations)) + 1j * rng.standard_normal((d, iterations))], axis=1)
    X = X / _col_pnorms(X, p)
    best = 0.0
    prev = np.zeros(X.shape[1])
    for _ in range(200):
        Y = bmat @ X
        vals = _col_pnorms(Y, p)
        best = max(best, float(vals.max(initial=0.0)))
        if np.all(vals <= prev * (1 + 1e-14) + 1e-300):
            break
        prev = np.maximum(prev, vals)
        Xn = _col_phase_power(bmat.conj().T @ _col_phase_power(Y, p - 1), q - 1)
        nrm = _col_pnorms(Xn, p)
        live = nrm > 0
        X = np.where(live, Xn / np.where(live, nrm, 1.0), X)
    return float(best)


def _dual_matrix(y, p):
    u, s, vh = np.linalg.svd(y)
    top = s.max(initial=0.0)
    if top == 0:
        return np.zeros_like(y)
    return (u * (s / top) ** (p - 1.0)) @ vh


def _full_pnorm(t, d, p, ctx, iterations, rng):
    def norm(x):
        return schatten_norm(x, p, ctx)

    def T(x):
        return (t @ x.reshape(-1)).reshape(d, d)

    def Tadj(y):
        return (t.conj().T @ y.reshape(-1)).reshape(d, d)

    starts = [np.outer(np.eye(d)[i], np.eye(d)[j]).astype(complex) for i in range(d) for j in range(d)]
    for _ in range(iterations):
        v = rng.standard_normal((d, 2)) @ np.array([1, 1j])
        u = rng.standard_normal((d, 2)) @ np.array([1, 1j])
        starts.append(np.outer(v, u.conj()))
        starts.append(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    pe = min(max(p, 1.0 + 1e-3), 1e3)
    qe = pe / (pe - 1.0)
    best = 0.0
    for x in starts:
        x = x / norm(x)
        for _ in range(100 if ctx.is_uniform else 0):
            y = T(x)
            if norm(y) == 0:
                break
            best = max(best, norm(y))
            xn = _dual_matrix(Tadj(_dual_matrix(y, pe)), qe)
            if norm(xn) == 0:
                break
            xn = xn / norm(xn)
            if np.allclose(xn, x, atol=1e-13):
                break
            x = xn
        best = max(best, norm(T(x)))
    return float(best)


def operator_pnorm(T, p: float, dim: int | None = None, ctx: TraceContext | None = None,
                   algebra: str | None = None, iterations: int = 8, seed: int = 0) -> float:
    """Estimate ``sup ||T x||_p / ||x||_p``.

    On the diagonal algebra the map reduces to a ``d x d`` matrix on weighted
    ``l_p``; ``p = 1`` and ``p = inf`` use the exact column/row formulas and
    other exponents use a nonlinear power iteration from every basis vector
    plus ``iterations`` random starts. On the full algebra the same ascent is
    run with Schatten duality maps. The result is a lower bound that is exact
    whenever the maximiser is reached, as for weighted permutations.
    """
    rng = np.random.default_rng(seed)
    if isinstance(T, LampertiOperator):
        ctx = ctx or T.ctx
        algebra = algebra or T.algebra
        dim = T.dim
        mat = T.diagonal_matrix() if algebra == "diagonal" else T.matrix()
    else:
        mat = np.asarray(T, dtype=complex)
        if dim is None:
            dim = int(round(np.sqrt(mat.shape[0]))) if algebra != "diagonal" else mat.shape[0]
        ctx = ctx or TraceContext(dim)
        algebra = algebra or "full"
        if algebra == "diagonal" and mat.shape == (dim * dim, dim * dim):
            idx = [i * dim + i for i in range(dim)]
            mat = mat[np.ix_(idx, idx)]
    p = float(p)
    if algebra == "diagonal":
        return _diag_pnorm(mat, p, ctx.w, iterations, rng)
    return _full_pnorm(mat, dim, p, ctx, iterations, rng)


# --------------------------------------------------------------- JSON


def _mat_json(m):
    m = np.asarray(m, complex)
    out = {"dim": m.shape[0], "re": m.real.tolist()}
    if np.any(m.imag != 0):
        out["im"] = m.imag.tolist()
    return out


def _mat_from(obj):
    from .opalg import element_from_json

    return element_from_json(obj).entries


def lamperti_to_json(T: LampertiOperator) -> dict:
    J = {"kind": T.J.kind}
    if T.J.kind == "point-permutation":
        J["pi"] = list(T.J.pi)
        J["support"] = list(T.J.support)
    else:
        J["u"] = _mat_json(T.J.u)
    return {"weights": list(T.ctx.weights), "w": _mat_json(T.w), "b": _mat_json(T.b), "J": J}


def lamperti_from_json(obj: dict) -> LampertiOperator:
    try:
        jd = obj["J"]
        kind = jd["kind"]
        if kind == "point-permutation":
            J = JordanDescriptor(kind, pi=tuple(jd["pi"]), support=jd.get("support"))
        else:
            J = JordanDescriptor(kind, u=_mat_from(jd["u"]))
        w, b = _mat_from(obj["w"]), _mat_from(obj["b"])
    except (KeyError, TypeError) as exc:
        raise DomainError(f"malformed Lamperti literal: {exc}") from exc
    ctx = TraceContext(J.dim, obj.get("weights"))
    return make_lamperti(w, b, J, ctx)
