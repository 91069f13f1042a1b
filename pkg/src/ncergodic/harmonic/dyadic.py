"""Nested dyadic cube systems on finite metric spaces."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .spaces import FiniteMetricSpace

__all__ = [
    "DyadicError",
    "DyadicConstructionError",
    "DyadicSystem",
    "PropertyCheck",
    "build_dyadic_system",
    "verify_dyadic_system",
    "boundary_layer_ratio",
    "dyadic_floor",
    "dyadic_ceil",
    "MAX_RETRIES",
]

MAX_RETRIES = 32


class DyadicError(ValueError):
    """Invalid construction parameters."""


class DyadicConstructionError(RuntimeError):
    """A cube violates a required property; ``witness`` identifies it."""

    def __init__(self, message: str, witness: dict):
        super().__init__(message)
        self.witness = witness


def dyadic_floor(x: float, delta: float) -> int:
    """Largest integer ``k`` with ``delta**k <= x``."""
    k = math.floor(math.log(x, delta))
    while delta ** (k + 1) <= x:
        k += 1
    while delta ** k > x:
        k -= 1
    return k


def dyadic_ceil(x: float, delta: float) -> int:
    """Smallest integer ``k`` with ``delta**k >= x``."""
    k = math.ceil(math.log(x, delta))
    while delta ** (k - 1) >= x:
        k -= 1
    while delta ** k < x:
        k += 1
    return k


@dataclass(frozen=True)
class DyadicSystem:
    """Generations of nested cubes with centres and parent links.

    Attributes
    ----------
    levels : tuple of int
        Generations in increasing order; larger ``k`` means coarser cubes.
        The finest generation consists of singletons and the coarsest is the
        whole space.
    labels : dict
        ``labels[k][h]`` is the index of the generation-``k`` cube containing
        point ``h``.
    centers : dict
        ``centers[k][a]`` is the point index of the centre of cube ``a``.
    parents : dict
        ``parents[k][a]`` is the index of the generation-``k+1`` cube
        containing cube ``a``; the top cube is its own parent.
    r0 : float
        Scale below which the annular decay condition is not required.
    seed : int
        Seed of the successful attempt.
    """

    space: FiniteMetricSpace
    delta: float
    c0: float
    C0: float
    levels: tuple
    labels: dict
    centers: dict
    parents: dict
    r0: float
    seed: int
    attempts: int = 1
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def a0(self) -> float:
        return self.c0 / 3.0

    @property
    def C1(self) -> float:
        return 2.0 * self.C0

    @property
    def top(self) -> int:
        return self.levels[-1]

    @property
    def bottom(self) -> int:
        return self.levels[0]

    @property
    def k2(self) -> int:
        """``min{k : a0 delta^k > r0}``."""
        k = dyadic_floor(self.r0 / self.a0, self.delta)
        return k + 1

    @property
    def n_r0(self) -> int:
        """The integer ``n`` with ``delta^n < r0 <= delta^(n+1)``."""
        return dyadic_ceil(self.r0, self.delta) - 1

    def n_cubes(self, k: int) -> int:
        return len(self.centers[k])

    def cubes(self, k: int) -> list[np.ndarray]:
        lab = self.labels[k]
        return [np.flatnonzero(lab == a) for a in range(self.n_cubes(k))]

    def masses(self, k: int) -> np.ndarray:
        """``m(Q)`` for each cube of generation ``k``."""
        return np.bincount(self.labels[k], weights=self.space.weights, minlength=self.n_cubes(k))

    def level(self, k: int) -> int:
        """Clamp ``k`` to the constructed generations.

        Below the finest generation every cube is a singleton and above the
        coarsest one the whole space is a single cube, so generations outside
        the constructed range repeat the boundary generation.
        """
        return min(max(k, self.bottom), self.top)

    def to_json(self) -> dict:
        gens = []
        for k in self.levels:
            cubes = []
            for a, members in enumerate(self.cubes(k)):
                cubes.append({
                    "center": int(self.centers[k][a]),
                    "parent": int(self.parents[k][a]),
                    "points": members.tolist(),
                    "mass": float(self.space.weights[members].sum()),
                })
            gens.append({"k": int(k), "cubes": cubes})
        return {"delta": self.delta, "c0": self.c0, "C0": self.C0, "a0": self.a0, "C1": self.C1,
                "r0": self.r0, "k2": self.k2, "n_r0": self.n_r0, "seed": self.seed,
                "attempts": self.attempts, "generations": gens}


class PropertyCheck(NamedTuple):
    name: str
    ok: bool
    detail: str


def _level_range(space: FiniteMetricSpace, delta: float, c0: float) -> tuple[int, int]:
    if space.n == 1:
        return 0, 0
    bottom = dyadic_floor(space.min_distance / c0, delta)
    top = bottom
    while c0 * delta ** top <= space.diameter:
        top += 1
    return bottom, top


def _attempt(space, delta, c0, C0, r0, seed):
    rng = np.random.default_rng(seed)
    order = rng.permutation(space.n)
    rank = np.empty(space.n, dtype=int)
    rank[order] = np.arange(space.n)
    bottom, top = _level_range(space, delta, c0)
    d = space.dist
    labels, centers, parents = {}, {}, {}
    net: list[int] = []
    for k in range(top, bottom - 1, -1):
        sep = c0 * delta ** k
        for x in order:
            if all(d[x, z] >= sep for z in net):
                net.append(int(x))
        cs = np.array(net)
        if k == top:
            lab = np.zeros(space.n, dtype=int)
            cs = cs[:1]
            net = net[:1]
        else:
            up = labels[k + 1]
            # a point may only join a centre lying in its own parent cube
            admissible = up[cs][None, :] == up[:, None]
            dd = np.where(admissible, d[:, cs], np.inf)
            best = dd.min(axis=1, keepdims=True)
            tie = np.where(dd == best, rank[cs][None, :], space.n)
            lab = np.argmin(tie, axis=1)
        labels[k] = lab
        centers[k] = cs
        parents[k] = (np.zeros(len(cs), dtype=int) if k == top else labels[k + 1][cs])
    levels = tuple(range(bottom, top + 1))
    return DyadicSystem(space, float(delta), float(c0), float(C0), levels,
                        labels, centers, parents, float(r0), int(seed))


def verify_dyadic_system(system: DyadicSystem) -> list[PropertyCheck]:
    """Check the net, partition, nesting, parent and ball-sandwich properties."""
    d = system.space.dist
    out = []
    bad = {}
    for k in system.levels:
        cs = system.centers[k]
        sep, dense = system.c0 * system.delta ** k, system.C0 * system.delta ** k
        if len(cs) > 1:
            sub = d[np.ix_(cs, cs)][~np.eye(len(cs), dtype=bool)]
            if sub.min() < sep:
                bad.setdefault("net", f"generation {k}: centres closer than {sep}")
        if d[:, cs].min(axis=1).max() >= dense:
            bad.setdefault("net", f"generation {k}: a point is {dense} or more from every centre")
    out.append(PropertyCheck("net", "net" not in bad, bad.get("net", "separated and dense")))

    msg = "every generation partitions the space"
    ok = True
    for k in system.levels:
        lab, cs = system.labels[k], system.centers[k]
        if lab.min() < 0 or lab.max() >= len(cs) or np.bincount(lab, minlength=len(cs)).min() == 0:
            ok, msg = False, f"generation {k}: empty or unlabelled cube"
            break
        if np.any(lab[cs] != np.arange(len(cs))):
            ok, msg = False, f"generation {k}: a centre lies outside its cube"
            break
    out.append(PropertyCheck("partition", ok, msg))

    ok, msg = True, "cubes are nested"
    for k in system.levels[:-1]:
        implied = system.parents[k][system.labels[k]]
        if np.any(implied != system.labels[k + 1]):
            ok, msg = False, f"generation {k}: a cube straddles two parents"
            break
    out.append(PropertyCheck("nesting", ok, msg))

    ok, msg = True, "each cube has one parent"
    for k in system.levels[:-1]:
        for a, members in enumerate(system.cubes(k)):
            if len(np.unique(system.labels[k + 1][members])) != 1:
                ok, msg = False, f"generation {k}, cube {a}: several parents"
                break
    if system.n_cubes(system.top) != 1:
        ok, msg = False, "the coarsest generation is not a single cube"
    out.append(PropertyCheck("parent", ok, msg))

    ok, msg = True, "ball sandwich holds"
    for k in system.levels:
        inner, outer = system.a0 * system.delta ** k, system.C1 * system.delta ** k
        lab = system.labels[k]
        for a, z in enumerate(system.centers[k]):
            ball_in = d[z] <= inner
            if np.any(ball_in & (lab != a)):
                ok, msg = False, f"generation {k}, cube {a}: inner ball leaves the cube"
                break
            if np.any((lab == a) & (d[z] >= outer)):
                ok, msg = False, f"generation {k}, cube {a}: cube leaves the outer ball"
                break
        if not ok:
            break
    out.append(PropertyCheck("sandwich", ok, msg))
    return out


def build_dyadic_system(space: FiniteMetricSpace, delta: float = 20.0, c0: float = 1.0,
                        C0: float = 1.1, seed: int = 0, *, r0: float | None = None,
                        retries: int = MAX_RETRIES) -> DyadicSystem:
    """Construct and verify a nested dyadic system.

    Centres of generation ``k`` form a maximal ``c0 delta^k``-separated set
    extending the centres of generation ``k+1``, scanned in a seeded random
    order. Cubes are filled top-down: each point joins the nearest centre
    inside its parent cube, ties going to the earlier point in the scan.
    If a property check fails the next seed is tried, up to ``retries``
    attempts.

    Parameters
    ----------
    delta, c0, C0 : float
        Must satisfy ``0 < c0 < C0`` and ``18 C0 / delta <= c0``.
    r0 : float, optional
        Threshold scale; defaults to the smallest positive distance.

    Raises
    ------
    DyadicError
        If the parameters are inconsistent.
    DyadicConstructionError
        If every attempt fails; carries the last failing property.
    """
    if not (delta > 1 and 0 < c0 < C0):
        raise DyadicError("need delta > 1 and 0 < c0 < C0")
    if 18 * C0 / delta > c0 * (1 + 1e-12):
        raise DyadicError(f"18*C0/delta = {18 * C0 / delta:.6g} exceeds c0 = {c0}")
    if r0 is None:
        r0 = space.min_distance if space.n > 1 else 1.0
    if r0 <= 0:
        raise DyadicError("r0 must be positive")
    last = None
    for attempt in range(retries):
        sys_ = _attempt(space, delta, c0, C0, r0, seed + attempt)
        checks = verify_dyadic_system(sys_)
        failed = [c for c in checks if not c.ok]
        if not failed:
            object.__setattr__(sys_, "attempts", attempt + 1)
            return sys_
        last = failed[0]
    raise DyadicConstructionError(f"{last.name} failed after {retries} attempts: {last.detail}",
                                  {"property": last.name, "detail": last.detail})


def boundary_layer_ratio(system: DyadicSystem, k: int, L: int) -> float:
    """Mass fraction of generation-``k`` cubes lying near their complement.

    Returns ``sum_Q m({g in Q : d(g, G \\ Q) <= delta^(k-L)}) / m(G)``;
    cubes equal to the whole space contribute nothing.
    """
    sp = system.space
    lab = system.labels[k]
    width = system.delta ** (k - L)
    outside = lab[None, :] != lab[:, None]
    gap = np.where(outside, sp.dist, np.inf).min(axis=1)
    return float(sp.weights[gap <= width].sum() / sp.total_mass)
