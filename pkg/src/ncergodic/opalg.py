"""Noncommutative L_p core on matrix algebras.

Elements of M_d are dense complex matrices paired with a trace context.
The trace of ``x`` is ``sum_i w_i x_ii``; all weights equal to one gives the
counting trace. Linear maps on M_d are represented elsewhere in the package as
``d**2 x d**2`` matrices acting on the row-major vectorisation of ``x``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy import optimize

__all__ = [
    "TraceContext",
    "AlgebraElement",
    "RCInterval",
    "block_rc_norm",
    "DimensionError",
    "DomainError",
    "ResourceError",
    "as_array",
    "trace",
    "schatten_norm",
    "weak_quasinorm",
    "modulus",
    "spectral_projection",
    "support_projection",
    "projection_meet",
    "projection_join",
    "row_norm",
    "column_norm",
    "rc_norm",
    "khintchine_mean",
    "bmo_norm",
    "vec",
    "unvec",
    "map_matrix",
    "apply_map",
    "element_from_json",
    "element_to_json",
    "parse_exact",
]

MAX_DIM = 64
KHINTCHINE_MAX_TERMS = 16
RANK_TOL = 1e-9


class DimensionError(ValueError):
    """Shapes or trace contexts do not match."""


class DomainError(ValueError):
    """Input lies outside the domain of an operation."""


class ResourceError(RuntimeError):
    """A request exceeds a documented size cap."""


@dataclass(frozen=True)
class TraceContext:
    """Weighted trace on M_d.

    Parameters
    ----------
    dim : int
        Matrix size.
    weights : sequence of float, optional
        Positive diagonal weights. Defaults to the counting trace.
    """

    dim: int
    weights: tuple = field(default=None)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise DimensionError("dim must be at least 1")
        object.__setattr__(self, "dim", int(self.dim))
        if self.weights is None:
            w = (1.0,) * self.dim
        else:
            w = tuple(float(v) for v in self.weights)
        if len(w) != self.dim:
            raise DimensionError(f"expected {self.dim} weights, got {len(w)}")
        if any(not (v > 0) for v in w):
            raise DomainError("trace weights must be positive")
        object.__setattr__(self, "weights", w)

    @classmethod
    def counting(cls, dim: int) -> "TraceContext":
        return cls(dim)

    @property
    def w(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)

    @property
    def is_uniform(self) -> bool:
        return len(set(self.weights)) == 1

    def trace(self, x) -> complex:
        x = np.asarray(x)
        return complex(np.dot(self.w, np.diagonal(x)))

    def normalized(self) -> "TraceContext":
        """Return the context whose trace is a state (total weight one)."""
        s = sum(self.weights)
        return TraceContext(self.dim, tuple(v / s for v in self.weights))


@dataclass(frozen=True, eq=False)
class AlgebraElement:
    """A matrix in M_d together with its trace context."""

    ctx: TraceContext
    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=complex)
        if a.shape != (self.ctx.dim, self.ctx.dim):
            raise DimensionError(f"entries of shape {a.shape} do not match dim {self.ctx.dim}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @classmethod
    def of(cls, entries, ctx: TraceContext | None = None) -> "AlgebraElement":
        a = np.asarray(entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        return cls(ctx or TraceContext(a.shape[0]), a)

    @property
    def dim(self) -> int:
        return self.ctx.dim

    @property
    def H(self) -> "AlgebraElement":
        return AlgebraElement(self.ctx, self.entries.conj().T)

    def _lift(self, other):
        if isinstance(other, AlgebraElement):
            if other.ctx != self.ctx:
                raise DimensionError("trace contexts differ")
            return other.entries
        return np.asarray(other)

    def __add__(self, other):
        return AlgebraElement(self.ctx, self.entries + self._lift(other))

    def __sub__(self, other):
        return AlgebraElement(self.ctx, self.entries - self._lift(other))

    def __matmul__(self, other):
        return AlgebraElement(self.ctx, self.entries @ self._lift(other))

    def __mul__(self, scalar):
        return AlgebraElement(self.ctx, self.entries * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return AlgebraElement(self.ctx, -self.entries)

    def trace(self) -> complex:
        return self.ctx.trace(self.entries)

    def allclose(self, other, atol: float = 1e-10) -> bool:
        return bool(np.allclose(self.entries, self._lift(other), atol=atol, rtol=0))


class RCInterval(NamedTuple):
    """Two-sided certificate for a sum-norm infimum."""

    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def __contains__(self, value) -> bool:
        return self.lower - 1e-12 <= value <= self.upper + 1e-12


def _unpack(x, ctx: TraceContext | None = None):
    if isinstance(x, AlgebraElement):
        if ctx is not None and ctx != x.ctx:
            raise DimensionError("trace contexts differ")
        return x.entries, x.ctx
    a = np.asarray(x, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if ctx is None:
        ctx = TraceContext(a.shape[0])
    elif ctx.dim != a.shape[0]:
        raise DimensionError(f"matrix of size {a.shape[0]} in a context of dim {ctx.dim}")
    return a, ctx


def _wrap(a, ctx, like):
    return AlgebraElement(ctx, a) if isinstance(like, AlgebraElement) else a


def as_array(x) -> np.ndarray:
    """Return the complex matrix behind ``x``."""
    return _unpack(x)[0]


def trace(x, ctx: TraceContext | None = None) -> complex:
    a, ctx = _unpack(x, ctx)
    return ctx.trace(a)


def _eigh(a: np.ndarray):
    h = (a + a.conj().swapaxes(-1, -2)) / 2
    return np.linalg.eigh(h)


def _trace_of_power(s: np.ndarray, power: float, ctx: TraceContext) -> np.ndarray:
    """tau(s**power) for positive semidefinite ``s`` (batched over leading axes)."""
    vals, vecs = _eigh(s)
    vals = np.clip(vals, 0.0, None)
    with np.errstate(divide="ignore"):
        pw = np.where(vals > 0, vals ** power, 0.0)
    if ctx.is_uniform:
        return ctx.weights[0] * pw.sum(axis=-1)
    mass = np.einsum("...ik,i,...ik->...k", vecs.conj(), ctx.w, vecs).real
    return (pw * mass).sum(axis=-1)


def _psd_pnorm(s: np.ndarray, p: float, ctx: TraceContext) -> np.ndarray:
    """||s^{1/2}||_p for positive semidefinite ``s``."""
    if np.isinf(p):
        vals = np.linalg.eigvalsh((s + s.conj().swapaxes(-1, -2)) / 2)
        return np.sqrt(np.clip(vals[..., -1], 0.0, None))
    return _trace_of_power(s, p / 2.0, ctx) ** (1.0 / p)


def _abs_pnorm(y: np.ndarray, p: float, ctx: TraceContext) -> np.ndarray:
    """``||(y* y)^(1/2)||_p`` from an SVD of ``y`` (batched, ``y`` of shape ``(..., m, d)``).

    Working with singular values of ``y`` instead of eigenvalues of ``y* y``
    keeps small singular values accurate, which matters for ``p`` near 1.
    """
    if np.isinf(p):
        return np.linalg.svd(y, compute_uv=False)[..., 0] if y.shape[-2] else np.zeros(y.shape[:-2])
    _, s, vh = np.linalg.svd(y, full_matrices=False)
    pw = s ** p
    if ctx.is_uniform:
        tr = ctx.weights[0] * pw.sum(axis=-1)
    else:
        # |y|^p = V diag(s^p) V*, so the weighted trace needs the mass of each right vector
        mass = np.einsum("...ki,i,...ki->...k", vh.conj(), ctx.w, vh).real
        tr = (pw * mass).sum(axis=-1)
    return tr ** (1.0 / p)


def _check_p(p) -> float:
    p = float(p)
    if not p >= 1:
        raise DomainError(f"p must lie in [1, inf], got {p}")
    return p


def schatten_norm(x, p=2.0, ctx: TraceContext | None = None) -> float:
    """Noncommutative L_p norm ``tau(|x|^p)^(1/p)``; ``p=inf`` is the operator norm.

    Examples
    --------
    >>> schatten_norm(np.diag([3.0, 4.0]), 2)
    5.0
    """
    a, ctx = _unpack(x, ctx)
    p = _check_p(p)
    return float(_abs_pnorm(a, p, ctx))


def weak_quasinorm(x, p, ctx: TraceContext | None = None) -> float:
    """Weak L_p quasinorm ``sup_l l * tau(chi_(l,inf)(|x|))^(1/p)``.

    The supremum over a step function in ``l`` is attained as ``l`` increases
    to one of the singular values, so only those candidates are scanned.
    """
    a, ctx = _unpack(x, ctx)
    p = _check_p(p)
    if np.isinf(p):
        raise DomainError("weak quasinorm needs finite p")
    _, s, vh = np.linalg.svd(a)
    tol = RANK_TOL * max(s.max(initial=0.0), 1e-300)
    mass = np.einsum("ki,i,ki->k", vh.conj(), ctx.w, vh).real
    best = 0.0
    for level in np.unique(s[s > tol]):
        best = max(best, level * mass[s >= level - tol].sum() ** (1.0 / p))
    return float(best)


def modulus(x):
    """Positive square root of ``x* x``."""
    a, ctx = _unpack(x)
    _, s, vh = np.linalg.svd(a)
    r = (vh.conj().T * s) @ vh
    return _wrap(r, ctx, x)


def _require_hermitian(a, tol=1e-9):
    scale = max(1.0, np.abs(a).max(initial=0.0))
    if np.abs(a - a.conj().T).max(initial=0.0) > tol * scale:
        raise DomainError("element is not self-adjoint")


def spectral_projection(a, lo=0.0, hi=np.inf, *, closed_lo: bool = False):
    """Projection onto eigenvectors of self-adjoint ``a`` with eigenvalue in ``(lo, hi]``.

    Parameters
    ----------
    a : array_like or AlgebraElement
        Self-adjoint element.
    lo, hi : float
        Interval endpoints; ``hi`` is included and ``lo`` excluded unless
        ``closed_lo`` is set.
    """
    m, ctx = _unpack(a)
    _require_hermitian(m)
    vals, vecs = _eigh(m)
    tol = RANK_TOL * max(np.abs(vals).max(initial=0.0), 1.0)
    lower_ok = vals >= lo - tol if closed_lo else vals > lo + tol
    sel = lower_ok & (vals <= hi + tol)
    v = vecs[:, sel]
    return _wrap(v @ v.conj().T, ctx, a)


def support_projection(x):
    """Range projection of a positive semidefinite element."""
    m, ctx = _unpack(x)
    _require_hermitian(m)
    vals, vecs = _eigh(m)
    scale = np.abs(vals).max(initial=0.0)
    if scale > 0 and vals.min() < -RANK_TOL * max(scale, 1.0):
        raise DomainError("element is not positive semidefinite")
    v = vecs[:, vals > RANK_TOL * scale] if scale > 0 else vecs[:, :0]
    return _wrap(v @ v.conj().T, ctx, x)


def projection_meet(projections: Sequence, tol: float = 1e-10) -> np.ndarray:
    """Projection onto the intersection of the ranges of ``projections``.

    A vector lies in every range exactly when it is annihilated by the positive
    operator ``sum_j (1 - p_j)``, so the meet is read off that kernel.
    """
    ps = [as_array(q) for q in projections]
    d = ps[0].shape[0]
    s = sum(np.eye(d) - q for q in ps)
    vals, vecs = _eigh(s)
    v = vecs[:, vals <= tol]
    return v @ v.conj().T


def projection_join(projections: Sequence, tol: float = 1e-10) -> np.ndarray:
    """Projection onto the span of the ranges of ``projections`` (non-empty)."""
    ps = [as_array(q) for q in projections]
    if not ps:
        raise DomainError("join of an empty family has no dimension")
    vals, vecs = _eigh(sum(ps))
    v = vecs[:, vals > tol]
    return v @ v.conj().T


# ---------------------------------------------------------------- sequences


def _stack(xs, ctx=None):
    if isinstance(xs, AlgebraElement) or (isinstance(xs, np.ndarray) and xs.ndim == 2):
        xs = [xs]
    items = list(xs)
    if not items:
        raise DomainError("empty sequence")
    arrs = []
    for it in items:
        a, c = _unpack(it, ctx)
        ctx = c
        arrs.append(a)
    return np.stack(arrs), ctx


def column_norm(xs, p, ctx: TraceContext | None = None) -> float:
    """``||(sum_n x_n* x_n)^(1/2)||_p``."""
    a, ctx = _stack(xs, ctx)
    return float(_abs_pnorm(a.reshape(-1, a.shape[-1]), _check_p(p), ctx))


def row_norm(xs, p, ctx: TraceContext | None = None) -> float:
    """``||(sum_n x_n x_n*)^(1/2)||_p``."""
    a, ctx = _stack(xs, ctx)
    # sum x x* = R R* with R = [x_1 ... x_n]; its square root is |R*|
    rstar = a.conj().swapaxes(-1, -2).reshape(-1, a.shape[-1])
    return float(_abs_pnorm(rstar, _check_p(p), ctx))


def _conj_exp(p: float) -> float:
    if p == 1:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def _norm_grad(y: np.ndarray, p: float, c):
    """Value and real gradient of ``Y -> (sum_B c_B sum s(Y_B)^p)^(1/p)``.

    ``y`` has shape ``(B, r, s)``: a block-diagonal operator with block trace
    weights ``c`` (scalar or length ``B``).
    """
    if y.ndim == 2:
        y = y[None]
    c = np.broadcast_to(np.asarray(c, dtype=float), (y.shape[0],))
    u, s, vh = np.linalg.svd(y, full_matrices=False)
    smax = s.max() if s.size else 0.0
    if smax <= 0:
        return 0.0, np.zeros_like(y)
    if np.isinf(p):
        b = int(np.argmax(s[:, 0]))
        g = np.zeros_like(y)
        g[b] = np.outer(u[b, :, 0], vh[b, 0])
        return float(s[b, 0]), g
    keep = s > 1e-14 * smax
    sp = np.where(keep, s, 0.0)
    val = float(np.sum(c[:, None] * sp ** p) ** (1.0 / p))
    scale = np.where(keep, np.where(keep, s, 1.0) ** (p - 1.0), 0.0)
    g = c[:, None, None] * (u * scale[:, None, :]) @ vh / val ** (p - 1.0)
    return val, g


def _col_stack(a):  # (n, B, d, d) -> (B, n d, d); Y*Y = sum a_n* a_n
    n, b, d, e = a.shape
    return a.transpose(1, 0, 2, 3).reshape(b, n * d, e)


def _col_unstack(y, n):
    b, nd, e = y.shape
    return y.reshape(b, n, nd // n, e).transpose(1, 0, 2, 3)


def _row_stack(a):  # (n, B, d, d) -> (B, d, n d); R R* = sum a_n a_n*
    n, b, d, e = a.shape
    return a.transpose(1, 2, 0, 3).reshape(b, d, n * e)


def _row_unstack(r, n):
    b, d, ne = r.shape
    return r.reshape(b, d, n, ne // n).transpose(2, 0, 1, 3)


def _sum_norm_upper(a, p, c):
    n = a.shape[0]
    size = a.size

    def split(v):
        return (v[:size] + 1j * v[size:]).reshape(a.shape)

    def obj(v):
        z = split(v)
        vc, gc = _norm_grad(_col_stack(a - z), p, c)
        vr, gr = _norm_grad(_row_stack(z), p, c)
        g = -_col_unstack(gc, n) + _row_unstack(gr, n)
        return vc + vr, np.concatenate([g.real.ravel(), g.imag.ravel()])

    best_val, best_z = np.inf, None
    for z0 in (np.zeros_like(a), a.copy(), a / 2):
        v0 = np.concatenate([z0.real.ravel(), z0.imag.ravel()])
        res = optimize.minimize(obj, v0, jac=True, method="L-BFGS-B",
                                options={"maxiter": 500, "gtol": 1e-12, "ftol": 1e-15})
        val, _ = obj(res.x)
        if val < best_val:
            best_val, best_z = val, split(res.x)
    return float(best_val), best_z


def _dual_ratio(w, a, q, c):
    """Lower bound ``Re <w, a> / max(col_q(w), row_q(w))`` from a dual witness."""
    cb = np.broadcast_to(np.asarray(c, dtype=float), (a.shape[1],))
    pair = float(np.real(np.einsum("b,nbij,nbij->", cb, w.conj(), a)))
    den = max(_norm_grad(_col_stack(w), q, c)[0], _norm_grad(_row_stack(w), q, c)[0])
    return pair / den if den > 0 else 0.0


def _sum_norm_lower(a, p, c, z_opt, witnesses, rng, upper=np.inf):
    n = a.shape[0]
    q = _conj_exp(p)
    # gradients carry the block weight, which the pairing already applies
    inv = 1.0 / np.broadcast_to(np.asarray(c, dtype=float), (a.shape[1],))[:, None, None]
    cands = []
    for y in (a, a - z_opt):
        _, g = _norm_grad(_col_stack(y), p, c)
        cands.append(_col_unstack(g * inv, n))
    for z in (a, z_opt):
        _, g = _norm_grad(_row_stack(z), p, c)
        cands.append(_row_unstack(g * inv, n))
    cands.append((cands[1] + cands[3]) / 2)
    for k in range(n):
        u, _, vh = np.linalg.svd(a[k])
        w = np.zeros_like(a)
        w[k] = u @ vh
        cands.append(w)
    for _ in range(witnesses):
        cands.append(rng.standard_normal(a.shape) + 1j * rng.standard_normal(a.shape))
    ratios = [_dual_ratio(w, a, q, c) for w in cands]
    best = int(np.argmax(ratios))
    start = cands[best]
    size = a.size

    def neg_ratio(v):
        w = (v[:size] + 1j * v[size:]).reshape(a.shape)
        return -_dual_ratio(w, a, q, c)

    lower = max(ratios)
    if upper - lower <= 1e-6 * max(upper, 1.0) or size > 64:
        return float(lower)
    v0 = np.concatenate([start.real.ravel(), start.imag.ravel()])
    res = optimize.minimize(neg_ratio, v0, method="Powell",
                            options={"maxiter": 2000, "xtol": 1e-10, "ftol": 1e-13})
    return float(max(lower, -neg_ratio(res.x)))


def block_rc_norm(blocks, p, weights, *, witnesses: int = 200, seed: int = 0):
    """rc norm of a sequence of block-diagonal operators.

    Parameters
    ----------
    blocks : array_like, shape (n, B, d, d)
        ``blocks[k, b]`` is block ``b`` of the ``k``-th term.
    p : float
    weights : array_like, shape (B,)
        Trace weight carried by each block; the trace is
        ``sum_b weights[b] * tr(x_b)``.

    Returns
    -------
    float or RCInterval
        Same conventions as :func:`rc_norm`. The optimisation for ``p < 2``
        runs over block-diagonal decompositions, which suffices because the
        block-diagonal expectation contracts both the row and column norms.
    """
    a = np.asarray(blocks, dtype=complex)
    if a.ndim != 4 or a.shape[2] != a.shape[3]:
        raise DimensionError("blocks must have shape (n, B, d, d)")
    c = np.asarray(weights, dtype=float)
    if c.shape != (a.shape[1],) or np.any(c <= 0):
        raise DomainError("weights must be positive, one per block")
    p = _check_p(p)
    col = _norm_grad(_col_stack(a), p, c)[0]
    row = _norm_grad(_row_stack(a), p, c)[0]
    if p >= 2:
        return max(col, row)
    if np.allclose(a, 0):
        return RCInterval(0.0, 0.0)
    trivial = min(col, row)
    upper, z_opt = _sum_norm_upper(a, p, c)
    if upper > trivial:
        upper = trivial
        z_opt = a if row <= col else np.zeros_like(a)
    rng = np.random.default_rng(seed)
    lower = _sum_norm_lower(a, p, c, z_opt, witnesses, rng, upper)
    return RCInterval(min(lower, upper), upper)


def rc_norm(xs, p, side: str = "rc", ctx: TraceContext | None = None, *,
            witnesses: int = 200, seed: int = 0):
    """Row, column or rc square-function norm of a finite sequence.

    Parameters
    ----------
    xs : sequence of array_like or AlgebraElement
    p : float
        Exponent in ``[1, inf]``.
    side : {"row", "column", "rc"}
    witnesses : int
        Random dual witnesses used for the lower bound when ``side="rc"``
        and ``p < 2``.

    Returns
    -------
    float or RCInterval
        For ``p >= 2`` the rc norm is ``max(row, column)``. For ``p < 2`` it is
        the infimum of ``column(y) + row(z)`` over ``x_n = y_n + z_n``; the
        result is an interval whose upper end comes from minimising over
        decompositions and whose lower end is the best dual witness in the
        intersection norm at the conjugate exponent.
    """
    a, ctx = _stack(xs, ctx)
    p = _check_p(p)
    if side in ("column", "col"):
        return column_norm(a, p, ctx)
    if side == "row":
        return row_norm(a, p, ctx)
    if side != "rc":
        raise DomainError(f"unknown side {side!r}")
    if ctx.is_uniform:
        return block_rc_norm(a[:, None], p, ctx.weights[:1],
                             witnesses=witnesses, seed=seed)
    if p >= 2:
        return max(column_norm(a, p, ctx), row_norm(a, p, ctx))
    off = a - np.einsum("nii->ni", a)[..., None] * np.eye(a.shape[-1])
    if np.allclose(off, 0):
        # diagonal terms under a weighted trace: blocks of size one
        diag = np.einsum("nii->ni", a)[..., None, None]
        return block_rc_norm(diag, p, ctx.weights, witnesses=witnesses, seed=seed)
    return RCInterval(0.0, min(column_norm(a, p, ctx), row_norm(a, p, ctx)))


def khintchine_mean(xs, p, ctx: TraceContext | None = None) -> float:
    """Exact Rademacher mean ``(E ||sum eps_n x_n||_p^p)^(1/p)`` by enumeration."""
    a, ctx = _stack(xs, ctx)
    p = _check_p(p)
    n = a.shape[0]
    if n > KHINTCHINE_MAX_TERMS:
        raise ResourceError(f"{n} terms exceed the enumeration cap {KHINTCHINE_MAX_TERMS}")
    signs = np.array(list(itertools.product((1.0, -1.0), repeat=n)))
    sums = np.tensordot(signs, a, axes=(1, 0))
    norms = _abs_pnorm(sums, p, ctx)
    if np.isinf(p):
        return float(norms.max())
    return float(np.mean(norms ** p) ** (1.0 / p))


def bmo_norm(f, system, side: str = "max") -> float:
    """Dyadic martingale BMO norm of an operator field.

    ``column`` is the supremum over non-top cubes ``Q`` of
    ``|| m(Q)^-1 sum_{h in Q} m(h) |f(h) - f_parent(Q)|^2 ||_inf^(1/2)``;
    ``row`` applies the same to ``f*`` and ``max`` takes the larger.
    """
    if side == "max":
        return max(bmo_norm(f, system, "column"), bmo_norm(f, system, "row"))
    vals = np.asarray(f.values, dtype=complex)
    if side == "row":
        vals = vals.conj().swapaxes(-1, -2)
    elif side not in ("column", "col"):
        raise DomainError(f"unknown side {side!r}")
    m = np.asarray(system.space.weights, dtype=float)
    best = 0.0
    levels = list(system.levels)
    for k, k_up in zip(levels[:-1], levels[1:]):
        up = np.asarray(system.labels[k_up])
        avg = np.zeros((up.max() + 1,) + vals.shape[1:], complex)
        np.add.at(avg, up, m[:, None, None] * vals)
        mass_up = np.bincount(up, weights=m)
        diff = vals - (avg / mass_up[:, None, None])[up]
        sq = m[:, None, None] * np.einsum("hji,hjk->hik", diff.conj(), diff)
        lab = np.asarray(system.labels[k])
        tot = np.zeros((lab.max() + 1,) + vals.shape[1:], complex)
        np.add.at(tot, lab, sq)
        tot /= np.bincount(lab, weights=m)[:, None, None]
        top = np.linalg.eigvalsh((tot + tot.conj().swapaxes(-1, -2)) / 2)[:, -1]
        best = max(best, float(np.sqrt(max(top.max(), 0.0))))
    return best


# ------------------------------------------------------------- linear maps


def vec(x) -> np.ndarray:
    """Row-major vectorisation."""
    return as_array(x).reshape(-1)


def unvec(v, d: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    d = d or int(round(np.sqrt(v.size)))
    return v.reshape(d, d)


def map_matrix(fn, d: int, dtype=complex) -> np.ndarray:
    """Matrix of the linear map ``fn`` on M_d in the row-major matrix-unit basis."""
    cols = []
    for k in range(d * d):
        e = np.zeros(d * d, dtype=dtype)
        e[k] = 1
        cols.append(np.asarray(fn(e.reshape(d, d))).reshape(-1))
    return np.stack(cols, axis=1)


def apply_map(t: np.ndarray, x) -> np.ndarray:
    a = as_array(x)
    return (np.asarray(t) @ a.reshape(-1)).reshape(a.shape)


# ------------------------------------------------------------ serialisation


def parse_exact(value) -> Fraction:
    """Exact rational from a number or decimal/fraction string."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(repr(value))
    return Fraction(str(value).strip())


def _grid(rows, conv):
    return [[conv(v) for v in row] for row in rows]


def element_from_json(obj: dict, exact: bool = False):
    """Read a matrix literal ``{"dim", "weights", "re", "im"}``.

    With ``exact=True`` the entries are returned as an object array of
    ``Fraction`` (imaginary parts must vanish) together with the context.
    """
    if not isinstance(obj, dict) or "re" not in obj:
        raise DomainError("matrix literal needs at least a 're' field")
    re = obj["re"]
    d = int(obj.get("dim", len(re)))
    im = obj.get("im")
    weights = obj.get("weights")
    ctx = TraceContext(d, None if weights is None else [float(parse_exact(w)) for w in weights])
    if exact:
        if im is not None and any(parse_exact(v) != 0 for row in im for v in row):
            raise DomainError("exact backend accepts real rational entries only")
        arr = np.array(_grid(re, parse_exact), dtype=object)
        if arr.shape != (d, d):
            raise DimensionError(f"literal of shape {arr.shape} does not match dim {d}")
        return arr, ctx
    a = np.array(_grid(re, lambda v: float(parse_exact(v))), dtype=complex)
    if im is not None:
        a = a + 1j * np.array(_grid(im, lambda v: float(parse_exact(v))))
    return AlgebraElement(ctx, a)


def element_to_json(x) -> dict:
    a, ctx = _unpack(x)
    out = {"dim": ctx.dim, "weights": list(ctx.weights), "re": a.real.tolist()}
    if np.any(a.imag != 0):
        out["im"] = a.imag.tolist()
    return out
