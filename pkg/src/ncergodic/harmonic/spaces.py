"""Finite metric measure spaces and their geometric diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np

__all__ = [
    "SpaceError",
    "FiniteMetricSpace",
    "z_interval",
    "z2_box",
    "two_cluster",
    "space_from_json",
    "DoublingCertificate",
    "doubling_constant",
    "AnnularFit",
    "annular_decay_fit",
    "hl_operator_norms",
]

METRIC_CHECK_MAX = 256
_TOL = 1e-12


class SpaceError(ValueError):
    """Invalid metric data or generator specification."""


@dataclass(frozen=True)
class FiniteMetricSpace:
    """A finite set with a metric and a positive measure.

    Parameters
    ----------
    points : sequence
        Labels, one per point.
    dist : array_like, shape (n, n)
        Distance matrix. Metric axioms are verified on construction when
        ``n <= 256`` (all triples).
    weights : array_like, shape (n,), optional
        Point masses; defaults to the counting measure.
    """

    points: tuple
    dist: np.ndarray
    weights: np.ndarray = field(default=None)

    def __post_init__(self):
        d = np.array(self.dist, dtype=float)
        n = len(self.points)
        if d.shape != (n, n):
            raise SpaceError(f"distance matrix has shape {d.shape}, expected {(n, n)}")
        if n == 0:
            raise SpaceError("space must contain at least one point")
        w = np.ones(n) if self.weights is None else np.array(self.weights, dtype=float)
        if w.shape != (n,) or np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise SpaceError("weights must be finite and positive, one per point")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise SpaceError("distances must be finite and nonnegative")
        if np.any(np.diag(d) != 0):
            raise SpaceError("distance matrix must have a zero diagonal")
        if not np.array_equal(d, d.T):
            raise SpaceError("distance matrix must be symmetric")
        off = d[~np.eye(n, dtype=bool)]
        if np.any(off <= 0):
            raise SpaceError("distinct points must be at positive distance")
        if n <= METRIC_CHECK_MAX:
            scale = max(d.max(), 1.0)
            for k in range(n):
                if np.any(d > d[:, k:k + 1] + d[k:k + 1, :] + _TOL * scale):
                    i, j = np.argwhere(d > d[:, k:k + 1] + d[k:k + 1, :] + _TOL * scale)[0]
                    raise SpaceError(f"triangle inequality fails for ({i}, {k}, {j})")
        d.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "points", tuple(self.points))
        object.__setattr__(self, "dist", d)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def diameter(self) -> float:
        return float(self.dist.max())

    @property
    def min_distance(self) -> float:
        """Smallest positive distance, or ``inf`` for a single point."""
        if self.n == 1:
            return np.inf
        return float(self.dist[~np.eye(self.n, dtype=bool)].min())

    @property
    def total_mass(self) -> float:
        return float(self.weights.sum())

    def ball(self, h: int, r: float) -> np.ndarray:
        """Boolean mask of the closed ball ``{g : d(g, h) <= r}``."""
        return self.dist[h] <= r

    def ball_masses(self, r: float) -> np.ndarray:
        """``m(B(h, r))`` for every centre ``h``."""
        return (self.dist <= r) @ self.weights

    def distances(self) -> np.ndarray:
        """Sorted distinct positive distances."""
        return np.unique(self.dist[self.dist > 0])

    def radius_grid(self, lo: float = 0.0, hi: float | None = None) -> np.ndarray:
        """Distance values and their midpoints inside ``(lo, hi]``."""
        dv = self.distances()
        if dv.size == 0:
            return dv
        hi = self.diameter if hi is None else hi
        grid = np.unique(np.concatenate([dv, (dv[1:] + dv[:-1]) / 2]))
        return grid[(grid > lo) & (grid <= hi)]

    def to_json(self) -> dict:
        return {"points": self.n, "dist": self.dist.tolist(), "weights": self.weights.tolist()}


def _weights(spec: Any, n: int, rng: np.random.Generator | None) -> np.ndarray | None:
    if spec is None or spec == "unit":
        return None
    if spec == "random":
        rng = rng if rng is not None else np.random.default_rng(0)
        return rng.uniform(0.5, 2.0, n)
    return np.asarray(spec, dtype=float)


def z_interval(n: int, *, start: int = 0, weights=None, seed: int | None = None) -> FiniteMetricSpace:
    """``{start, ..., start + n - 1}`` with the absolute-value metric."""
    if n < 1:
        raise SpaceError("interval needs at least one point")
    x = np.arange(start, start + n)
    rng = np.random.default_rng(seed) if seed is not None else None
    return FiniteMetricSpace(tuple(int(v) for v in x), np.abs(x[:, None] - x[None, :]).astype(float),
                             _weights(weights, n, rng))


def z2_box(width: int, height: int, *, metric: str = "l1", weights=None,
           seed: int | None = None) -> FiniteMetricSpace:
    """Integer box ``[0, width) x [0, height)`` with the l1 or l-infinity metric."""
    if width < 1 or height < 1:
        raise SpaceError("box sides must be positive")
    xy = np.array([(i, j) for i in range(width) for j in range(height)])
    diff = np.abs(xy[:, None, :] - xy[None, :, :])
    if metric == "l1":
        d = diff.sum(-1)
    elif metric == "linf":
        d = diff.max(-1)
    else:
        raise SpaceError(f"unknown metric {metric!r}")
    rng = np.random.default_rng(seed) if seed is not None else None
    return FiniteMetricSpace(tuple(map(tuple, xy.tolist())), d.astype(float),
                             _weights(weights, len(xy), rng))


def two_cluster(size: int, gap: float, *, weights=None, seed: int | None = None) -> FiniteMetricSpace:
    """Two integer intervals of ``size`` points whose nearest points are ``gap`` apart."""
    if size < 1 or gap <= 0:
        raise SpaceError("need positive cluster size and gap")
    x = np.concatenate([np.arange(size), size - 1 + gap + np.arange(size)]).astype(float)
    rng = np.random.default_rng(seed) if seed is not None else None
    return FiniteMetricSpace(tuple(x.tolist()), np.abs(x[:, None] - x[None, :]),
                             _weights(weights, 2 * size, rng))


_GENERATORS = {
    "z-interval": lambda p: z_interval(int(p["n"]), start=int(p.get("start", 0)),
                                       weights=p.get("weights"), seed=p.get("seed")),
    "z2-box": lambda p: z2_box(int(p["width"]), int(p["height"]), metric=p.get("metric", "l1"),
                               weights=p.get("weights"), seed=p.get("seed")),
    "two-cluster": lambda p: two_cluster(int(p["size"]), float(p["gap"]),
                                         weights=p.get("weights"), seed=p.get("seed")),
}


def space_from_json(obj: dict) -> FiniteMetricSpace:
    """Build a space from explicit data or a generator spec.

    Accepts ``{"points": n, "dist": [[...]], "weights": [...]}`` or
    ``{"kind": "z-interval" | "z2-box" | "two-cluster", ...params}``.
    """
    if not isinstance(obj, dict):
        raise SpaceError("space spec must be a JSON object")
    if "kind" in obj:
        kind = obj["kind"]
        if kind not in _GENERATORS:
            raise SpaceError(f"unknown space kind {kind!r}; expected one of {sorted(_GENERATORS)}")
        try:
            return _GENERATORS[kind](obj)
        except KeyError as exc:
            raise SpaceError(f"space kind {kind!r} is missing parameter {exc}") from None
    try:
        pts = obj["points"]
        dist = obj["dist"]
    except KeyError as exc:
        raise SpaceError(f"space spec is missing {exc}") from None
    labels = tuple(range(pts)) if isinstance(pts, int) else tuple(pts)
    return FiniteMetricSpace(labels, np.asarray(dist, dtype=float), obj.get("weights"))


# -------------------------------------------------------------- diagnostics


class DoublingCertificate(NamedTuple):
    D: int
    center: int
    radius: float
    cover: tuple


def _greedy_cover(space: FiniteMetricSpace, target: np.ndarray, r: float) -> list[int]:
    reach = space.dist <= r  # reach[c, g]: centre c covers g
    left = target.copy()
    chosen = []
    while left.any():
        gain = reach[:, left].sum(axis=1)
        c = int(np.argmax(gain))
        chosen.append(c)
        left &= ~reach[c]
    return chosen


def doubling_constant(space: FiniteMetricSpace) -> DoublingCertificate:
    """Geometric doubling constant by greedy covering.

    For every centre ``h`` and every radius ``r`` in the distance set, the
    ball ``B(h, r)`` is covered greedily by balls of radius ``r/2`` centred
    anywhere in the space. The largest cover size is returned together with
    the ball that attains it; it is an upper bound for the optimal constant
    on this radius grid.
    """
    best = DoublingCertificate(1, 0, 0.0, (0,))
    for r in space.distances():
        for h in range(space.n):
            cover = _greedy_cover(space, space.ball(h, r), r / 2)
            if len(cover) > best.D:
                best = DoublingCertificate(len(cover), h, float(r), tuple(cover))
    return best


class AnnularFit(NamedTuple):
    K: float
    center: int
    r: float
    s: float
    pairs: int


def annular_decay_fit(space: FiniteMetricSpace, eps: float, r0: float) -> AnnularFit:
    """Smallest annular decay constant on the radius grid.

    Maximises ``[m(B(h, r+s)) - m(B(h, r))] / [(s/r)^eps m(B(h, r))]`` over
    centres ``h``, grid radii ``r`` in ``(r0, diam]`` and ``s`` in ``(0, r]``.
    For fixed ``r`` the numerator is a right-continuous step function of
    ``s`` and the denominator increases, so only the jump points
    ``s = d - r`` (``d`` a distance value) need checking; the maximum over
    ``s`` is therefore exact. The radius ``r`` is restricted to the grid
    because just below a distance value the continuous quotient is unbounded.
    """
    if not 0 < eps <= 1:
        raise SpaceError("eps must lie in (0, 1]")
    if r0 <= 0:
        raise SpaceError("r0 must be positive")
    dv = space.distances()
    best = AnnularFit(0.0, 0, 0.0, 0.0, 0)
    pairs = 0
    for r in space.radius_grid(lo=r0):
        inner = space.ball_masses(r)
        for d in dv[(dv > r) & (dv <= 2 * r)]:
            s = d - r
            outer = space.ball_masses(d)
            q = (outer - inner) / ((s / r) ** eps * inner)
            h = int(np.argmax(q))
            pairs += 1
            if q[h] > best.K:
                best = AnnularFit(float(q[h]), h, float(r), float(s), 0)
    return best._replace(pairs=pairs)


def hl_operator_norms(space: FiniteMetricSpace, r: float) -> tuple[float, float]:
    """Exact ``(||M_r||_{1->1}, ||M_r||_{inf->inf})`` of the ball average.

    The averaging kernel is ``k(h, g) = m(g) / m(B(h, r))`` on ``d(g, h) <= r``.
    The ``L_1`` norm is the largest column mass ``sum_h m(h) k(h, g) / m(g)``
    and the ``L_inf`` norm is the largest row sum, which is 1. Both norms are
    the same for operator-valued functions because the kernel is positive.
    """
    inside = space.dist <= r
    mass = inside @ space.weights
    col = (inside * (space.weights / mass)[:, None]).sum(axis=0)
    row = (inside * space.weights[None, :]).sum(axis=1) / mass
    return float(col.max()), float(row.max())
