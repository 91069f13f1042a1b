"""Radius splitting and empirical square-function constants."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from ..opalg import DomainError, ResourceError, block_rc_norm
from .dyadic import DyadicSystem, dyadic_ceil, dyadic_floor
from .martingale import OperatorField, conditional_expectation, hl_average

__all__ = [
    "split_intervals",
    "refined_radii",
    "difference_family",
    "long_operator",
    "field_rc_norm",
    "SqfnEstimate",
    "estimate_sqfn_constants",
    "MAX_SIGN_TERMS",
]

MAX_SIGN_TERMS = 14


def split_intervals(radii: Sequence[float], delta: float):
    """Split consecutive radius intervals at their extreme dyadic points.

    For ``I = [r_i, r_{i+1})`` let ``a`` and ``b`` be the smallest and largest
    powers ``delta^k`` in the closure of ``I``. Then ``[a, b)`` goes to the
    long list and ``[r_i, a)``, ``[b, r_{i+1})`` to the short list. Empty
    parts are dropped; an interval with no power of ``delta`` is short.

    Returns
    -------
    long, short : list of (float, float)

    Examples
    --------
    >>> split_intervals([1.5, 3, 10], 2)
    ([(4.0, 8.0)], [(1.5, 2.0), (2.0, 3), (3, 4.0), (8.0, 10)])
    """
    r = list(radii)
    if any(x <= 0 for x in r) or any(b <= a for a, b in zip(r, r[1:])):
        raise DomainError("radii must be positive and strictly increasing")
    if delta <= 1:
        raise DomainError("delta must exceed 1")
    long, short = [], []
    for lo, hi in zip(r, r[1:]):
        k_lo, k_hi = dyadic_ceil(lo, delta), dyadic_floor(hi, delta)
        if k_lo > k_hi:
            short.append((lo, hi))
            continue
        a, b = float(delta ** k_lo), float(delta ** k_hi)
        for part, bucket in (((lo, a), short), ((a, b), long), ((b, hi), short)):
            if part[0] < part[1]:
                bucket.append(part)
    return long, short


def refined_radii(radii: Sequence[float], delta: float) -> list[float]:
    """Endpoints of all split parts, in increasing order."""
    long, short = split_intervals(radii, delta)
    return sorted({x for part in long + short for x in part})


def difference_family(f: OperatorField, radii: Sequence[float]) -> np.ndarray:
    """``(M_{r_{i+1}} f - M_{r_i} f)_i`` as an array of shape ``(n_terms, n, d, d)``."""
    avgs = [hl_average(f, r).values for r in radii]
    if len(avgs) < 2:
        return np.zeros((0,) + f.values.shape, complex)
    return np.stack([b - a for a, b in zip(avgs, avgs[1:])])


def long_operator(f: OperatorField, system: DyadicSystem, v: Sequence[float] | None = None
                  ) -> OperatorField:
    """``L f = sum_{n >= 1} v_n (M_{delta^(n + n_r0)} f - E_{n + n_r0} f)``.

    Terms with ``n + n_r0`` above the coarsest generation vanish because
    both averages are then the global mean, so the sum is finite.
    ``v`` defaults to all ones.
    """
    n_terms = max(system.top - system.n_r0, 0)
    v = np.ones(n_terms) if v is None else np.asarray(v, dtype=float)
    if v.size < n_terms:
        raise DomainError(f"need {n_terms} weights, got {v.size}")
    out = np.zeros_like(f.values)
    for n in range(1, n_terms + 1):
        k = n + system.n_r0
        m = hl_average(f, system.delta ** k).values
        e = conditional_expectation(f, system, k, clamp=True).values
        out += v[n - 1] * (m - e)
    return f.with_values(out)


def field_rc_norm(terms: np.ndarray, f: OperatorField, p: float, **kw):
    """rc norm of a sequence of fields, viewed as block-diagonal operators."""
    if terms.shape[0] == 0:
        return 0.0
    weights = f.tau_scale * f.space.weights
    return block_rc_norm(terms, p, weights, **kw)


def _upper(x) -> float:
    return float(x.upper) if hasattr(x, "upper") else float(x)


def _lower(x) -> float:
    return float(x.lower) if hasattr(x, "lower") else float(x)


def _weak_sign_sup(terms: np.ndarray, f: OperatorField) -> float:
    """``max_eps ||sum_i eps_i T_i f||_{1,inf}`` over all sign patterns."""
    n = terms.shape[0]
    if n == 0:
        return 0.0
    if n > MAX_SIGN_TERMS:
        raise ResourceError(f"{n} terms exceed the sign enumeration cap {MAX_SIGN_TERMS}")
    best = 0.0
    # a global sign flip does not change the modulus
    for tail in itertools.product((1.0, -1.0), repeat=n - 1):
        eps = np.array((1.0,) + tail)
        best = max(best, f.with_values(np.tensordot(eps, terms, axes=1)).weak_norm(1))
    return best


@dataclass(frozen=True)
class SqfnEstimate:
    """Empirical maxima of the three ratios over random trials."""

    p: float
    size: int
    trials: int
    strong: float
    strong_lower: float
    weak: float
    long: float

    def to_json(self) -> dict:
        return asdict(self)


def estimate_sqfn_constants(system: DyadicSystem, p: float, trials: int, seed: int, *,
                            dim: int = 2, n_radii: int = 4, radii: Sequence[float] | None = None,
                            v: Sequence[float] | None = None, weak: bool = True) -> SqfnEstimate:
    """Empirical constants for the ball-average square functions.

    Each trial draws a Gaussian field ``f``; unless ``radii`` is given it also
    draws ``n_radii`` grid radii in ``(r0, diam]``. The radii are split at
    powers of ``delta`` and ``T_i = M_{s_{i+1}} - M_{s_i}`` over consecutive
    refined radii. Recorded ratios:

    * strong: ``||(T_i f)||_{L_p(l_2^rc)} / ||f||_p`` (upper end of the
      certified interval when ``p < 2``);
    * weak: ``max_eps ||sum eps_i T_i f||_{1,inf} / ||f||_1``;
    * long: ``||L f||_p / ||f||_p``.

    Parameters
    ----------
    p : float
        Exponent in ``[1, inf)``.
    weak : bool
        Skip the sign enumeration when false.
    """
    if not 1 <= p < np.inf:
        raise DomainError("p must lie in [1, inf)")
    sp = system.space
    rng = np.random.default_rng(seed)
    grid = sp.radius_grid(lo=system.r0)
    strong = strong_lo = weak_max = long_max = 0.0
    for _ in range(trials):
        f = OperatorField.random(sp, dim, rng)
        if radii is not None:
            rs = list(radii)
        elif grid.size >= 2:
            rs = sorted(rng.choice(grid, size=min(n_radii, grid.size), replace=False).tolist())
        else:
            rs = []
        fine = refined_radii(rs, system.delta) if len(rs) >= 2 else rs
        terms = difference_family(f, fine)
        fp = f.norm(p)
        val = field_rc_norm(terms, f, p)
        strong = max(strong, _upper(val) / fp)
        strong_lo = max(strong_lo, _lower(val) / fp)
        if weak:
            weak_max = max(weak_max, _weak_sign_sup(terms, f) / f.norm(1))
        long_max = max(long_max, long_operator(f, system, v).norm(p) / fp)
    return SqfnEstimate(float(p), sp.n, int(trials), strong, strong_lo, weak_max, long_max)
