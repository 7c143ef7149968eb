"""Closed-form average costs, the water-filling lower bound, and a geometric fit.

These are the analytic references the simulator is checked against.  A
device that can never be sampled (``w_i = p_i = 0`` with ``phi_i > 0``) has
an unbounded counter; the affected costs come back as ``inf`` and an
:class:`InfiniteCostWarning` is emitted.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import PathConfig
from .policies import _check_weights, order_statistic_probabilities


class InfiniteCostWarning(RuntimeWarning):
    pass


class InfeasibleWaterFilling(ValueError):
    pass


@dataclass(frozen=True)
class WaterFillingResult:
    weights: np.ndarray
    v: float
    active_set: tuple[int, ...]  # 1-based device indices with positive weight


@dataclass(frozen=True)
class GeometricFit:
    """Geometric fit of inter-sampling times.

    ``p_hat`` is the empirical ``Pr(Z = 1)``; ``p_mle = 1 / mean(Z)`` is kept
    as a diagnostic.  ``valid`` is false for degenerate input (``p_hat`` of
    0 or 1, or fewer than 1000 samples).
    """

    p_hat: float
    tv_distance: float
    sample_count: int
    p_mle: float
    valid: bool


def water_filling(config: PathConfig) -> WaterFillingResult:
    """Minimise ``sum_i phi_i (1/((1-p_i) a_i + p_i) - 1)`` over the simplex.

    The KKT solution is ``a_i = (v sqrt(phi_i/(1-p_i)) - p_i/(1-p_i))^+``.
    Device ``i`` becomes active once the level ``v`` passes its breakpoint
    ``p_i / sqrt(phi_i (1-p_i))``; the active set is grown in breakpoint order
    and ``v`` is solved exactly on each linear piece.
    """
    phi, p = config.phi, config.p
    eligible = (p < 1.0) & (phi > 0.0)
    if not eligible.any():
        raise InfeasibleWaterFilling("every device has p = 1 or phi = 0")
    idx = np.flatnonzero(eligible)
    slope = np.sqrt(phi[idx] / (1.0 - p[idx]))
    offset = p[idx] / (1.0 - p[idx])
    brk = offset / slope
    order = np.argsort(brk, kind="stable")
    slope, offset, brk, idx = slope[order], offset[order], brk[order], idx[order]

    sum_slope = sum_offset = 0.0
    v = math.nan
    k = 0
    for k in range(len(idx)):
        sum_slope += slope[k]
        sum_offset += offset[k]
        v = (1.0 + sum_offset) / sum_slope
        if k + 1 == len(idx) or v <= brk[k + 1]:
            break
    weights = np.zeros(config.M)
    active = idx[:k + 1]
    weights[active] = np.maximum(v * slope[:k + 1] - offset[:k + 1], 0.0)
    return WaterFillingResult(weights, float(v), tuple(sorted(int(i) + 1 for i in active)))


def _counter_means(phi: np.ndarray, q: np.ndarray, p: np.ndarray, what: str) -> float:
    # per-device stationary mean a/(1-a), a = (1-q)(1-p)
    a = (1.0 - q) * (1.0 - p)
    stuck = (a >= 1.0) & (phi > 0)
    if stuck.any():
        dev = [int(i) + 1 for i in np.flatnonzero(stuck)]
        warnings.warn(f"{what}: devices {dev} are never sampled; cost is infinite",
                      InfiniteCostWarning, stacklevel=3)
        return math.inf
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(phi > 0, phi * a / (1.0 - a), 0.0)
    return float(terms.sum())


def cost_uniform(config: PathConfig) -> float:
    """``sum_i phi_i (M-1)(1-p_i) / (M - (M-1)(1-p_i))``."""
    M = config.M
    phi, p = config.phi, config.p
    num = phi * (M - 1) * (1.0 - p)
    den = M - (M - 1) * (1.0 - p)
    return float(np.sum(num / den))


def cost_order_statistic(config: PathConfig, G: int) -> float:
    q = order_statistic_probabilities(config.M, G)
    return _counter_means(config.phi, q, config.p, "order-statistic")


def cost_weighted(config: PathConfig, weights: Sequence[float]) -> float:
    w = _check_weights(weights)
    if w.size != config.M:
        raise ValueError(f"{w.size} weights for {config.M} devices")
    return _counter_means(config.phi, w, config.p, "weighted")


def lower_bound(config: PathConfig) -> float:
    """Half of ``sum_i phi_i (1/((1-p_i) a_i + p_i) - 1)`` at the water-filling optimum."""
    alpha = water_filling(config).weights
    phi, p = config.phi, config.p
    rate = (1.0 - p) * alpha + p
    with np.errstate(divide="ignore"):
        terms = np.where(phi > 0, phi * (1.0 / rate - 1.0), 0.0)
    return 0.5 * float(terms.sum())


def stationary_mean_counter(q: float, p: float) -> float:
    """Mean of the geometric counter chain reset w.p. ``1 - (1-q)(1-p)`` per slot."""
    a = (1.0 - q) * (1.0 - p)
    if a >= 1.0:
        warnings.warn("q = p = 0: the counter never resets", InfiniteCostWarning, stacklevel=2)
        return math.inf
    return a / (1.0 - a)


def decoupled_gain(threshold_n: int, c: float, phi: float, p: float) -> float:
    """Average cost of the single-device policy that samples from ``threshold_n`` on."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    n = int(threshold_n)
    if n < 0:
        raise ValueError(f"threshold must be non-negative, got {threshold_n}")
    r = 1.0 - p
    tail = 1.0 - r ** (n + 1)
    return (p * r ** n / tail * c + phi * n
            - (r ** (n + 1) - r + n * p) / (p * tail) * phi)


def geometric_fit(intersample_times: Sequence[int]) -> GeometricFit:
    """Total-variation distance between the empirical PMF of ``Z`` and a geometric law.

    The geometric parameter is the empirical ``Pr(Z = 1)``.  The distance sums
    ``|emp(z) - geo(z)|`` for ``z = 1..max(Z)`` plus the geometric mass beyond
    ``max(Z)``, halved.
    """
    z = np.asarray(intersample_times, dtype=np.int64)
    if z.size == 0:
        raise ValueError("no inter-sampling times given")
    if np.any(z < 1):
        raise ValueError("inter-sampling times must be positive integers")
    counts = np.bincount(z)[1:]
    emp = counts / z.size
    p_hat = float(emp[0])
    p_mle = float(1.0 / z.mean())
    zs = np.arange(1, counts.size + 1)
    geo = (1.0 - p_hat) ** (zs - 1) * p_hat
    tail = (1.0 - p_hat) ** counts.size
    tv = 0.5 * (float(np.abs(emp - geo).sum()) + tail)
    valid = 0.0 < p_hat < 1.0 and z.size >= 1000
    return GeometricFit(p_hat=p_hat, tv_distance=min(tv, 1.0), sample_count=int(z.size),
                        p_mle=p_mle, valid=valid)
