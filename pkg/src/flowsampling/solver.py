"""Average-cost relative value iteration.

The full problem is solved on the truncated grid ``{0..U}^M`` (counters that
would exceed ``U`` stay at ``U``).  Because the counters of the non-sampled
devices move independently, the expected next-step value factorises into
one small linear map per axis, so a Bellman sweep costs ``O(M^2 (U+1)^M)``
instead of enumerating ``2^(M-1)`` successors per state-action pair.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .model import CounterState, PathConfig

log = logging.getLogger(__name__)

MAX_STATES = 10**7
DEFAULT_EPSILON = 1e-6
DEFAULT_MAX_ITER = 10**5
DECOUPLED_EPSILON = 1e-10
# relative slack under which two Q-values count as a tie
TIE_TOL = 1e-9


class StateSpaceTooLarge(ValueError):
    pass


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, span: float, iterations: int):
        super().__init__(message)
        self.span = span
        self.iterations = iterations


class WhittleBracketError(RuntimeError):
    pass


def span(x: np.ndarray) -> float:
    return float(np.max(x) - np.min(x))


@dataclass(frozen=True)
class RviSolution:
    """Relative values, gain and greedy policy on the truncated grid.

    ``h`` and ``policy`` are arrays of shape ``(U+1,)*M`` indexed by the
    counter tuple; ``policy`` holds 1-based device indices.
    """

    h: np.ndarray
    gain: float
    policy: np.ndarray
    epsilon: float
    iterations: int
    config: PathConfig = field(repr=False)
    final_span: float = 0.0

    @property
    def reference_state(self) -> CounterState:
        return (0,) * self.config.M

    @property
    def counter_cap(self) -> int:
        return self.config.counter_cap

    def clip(self, state) -> CounterState:
        if len(state) != self.config.M:
            raise ValueError(f"state has {len(state)} counters, table has {self.config.M}")
        U = self.counter_cap
        return tuple(min(int(n), U) for n in state)

    def action(self, state) -> int:
        return int(self.policy[self.clip(state)])

    def table_rows(self):
        """Yield ``(n_1, ..., n_M, action)`` for every truncated state."""
        for idx in np.ndindex(self.policy.shape):
            yield (*idx, int(self.policy[idx]))


@dataclass(frozen=True)
class DecoupledSolution:
    """Single-device solution for sampling cost ``c``.

    ``threshold`` is the smallest counter at which sampling is optimal;
    ``saturated`` is set when that threshold reaches the cap ``U`` (or no
    state samples at all), in which case it is not trustworthy.
    """

    h: np.ndarray
    gain: float
    threshold: int
    sampling_cost: float
    saturated: bool
    samples: np.ndarray
    iterations: int


def _cost_grid(config: PathConfig) -> np.ndarray:
    U, M = config.counter_cap, config.M
    n = np.arange(U + 1, dtype=float)
    cost = np.zeros((U + 1,) * M)
    for i, phi in enumerate(config.phi):
        shape = [1] * M
        shape[i] = U + 1
        cost = cost + phi * n.reshape(shape)
    return cost


def _axis_maps(config: PathConfig) -> tuple[np.ndarray, list[np.ndarray]]:
    """Transition matrices of a single counter: sampled, and not sampled."""
    U = config.counter_cap
    reset = np.zeros((U + 1, U + 1))
    reset[:, 0] = 1.0
    rest = []
    for p in config.p:
        A = np.zeros((U + 1, U + 1))
        A[:, 0] += p
        A[np.arange(U + 1), np.minimum(np.arange(U + 1) + 1, U)] += 1.0 - p
        rest.append(A)
    return reset, rest


def _apply_along(h: np.ndarray, A: np.ndarray, axis: int) -> np.ndarray:
    # out[..., n, ...] = sum_m A[n, m] h[..., m, ...]
    return np.moveaxis(np.tensordot(A, h, axes=([1], [axis])), 0, axis)


def _check_size(config: PathConfig):
    size = (config.counter_cap + 1) ** config.M
    if size > MAX_STATES:
        raise StateSpaceTooLarge(
            f"(U+1)^M = {config.counter_cap + 1}^{config.M} = {size} states exceeds {MAX_STATES}")
    return size


def _greedy(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise min over axis 0 and the first action within the tie slack."""
    best = q.min(axis=0)
    slack = TIE_TOL * np.maximum(1.0, np.abs(best))
    actions = np.argmax(q <= best + slack, axis=0)
    return best, actions


def action_values(h: np.ndarray, config: PathConfig, _cache=None) -> np.ndarray:
    """``Q[j][s] = C(s) + E[h(s') | s, sample device j+1]`` on the truncated grid."""
    M, U = config.M, config.counter_cap
    if h.shape != (U + 1,) * M:
        raise ValueError(f"h has shape {h.shape}, expected {(U + 1,) * M}")
    cost, reset, rest = _cache if _cache is not None else (_cost_grid(config), *_axis_maps(config))
    q = np.empty((M,) + h.shape)
    for j in range(M):
        e = h
        for i in range(M):
            e = _apply_along(e, reset if i == j else rest[i], i)
        q[j] = cost + e
    return q


def bellman_apply(h: np.ndarray, config: PathConfig, _cache=None) -> tuple[np.ndarray, np.ndarray]:
    """One Bellman sweep: new values and the greedy action map (1-based)."""
    best, actions = _greedy(action_values(h, config, _cache))
    return best, actions + 1


def relative_value_iteration(config: PathConfig, epsilon: float = DEFAULT_EPSILON,
                             max_iterations: int = DEFAULT_MAX_ITER) -> RviSolution:
    """Relative value iteration pinned at the all-zeros state.

    Starts from ``h = 0`` and stops once the span of successive differences
    drops to ``epsilon``.  The returned gain is ``T(h)[0]`` for the final
    normalised ``h``.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    _check_size(config)
    M, U = config.M, config.counter_cap
    cache = (_cost_grid(config), *_axis_maps(config))
    s0 = (0,) * M
    h = np.zeros((U + 1,) * M)
    sp = np.inf
    it = 0
    while sp > epsilon:
        if it >= max_iterations:
            raise ConvergenceError(
                f"relative value iteration did not converge in {max_iterations} "
                f"iterations (span {sp:.3g} > {epsilon:g})", sp, it)
        th, _ = bellman_apply(h, config, cache)
        h_new = th - th[s0]
        sp = span(h_new - h)
        h = h_new
        it += 1
    th, policy = bellman_apply(h, config, cache)
    log.debug("RVI converged after %d iterations, span %.3g", it, sp)
    return RviSolution(h=h, gain=float(th[s0]), policy=policy, epsilon=epsilon,
                       iterations=it, config=config, final_span=sp)


# -- decoupled single-device problem ----------------------------------------

def solve_decoupled(phi: float, p: float, c: float, U: int = 50,
                    epsilon: float = DECOUPLED_EPSILON,
                    max_iterations: int = DEFAULT_MAX_ITER) -> DecoupledSolution:
    """Relative value iteration for one device with sampling cost ``c``.

    Bellman equation, with ``h[0] = 0``::

        g + h[n] = min(c + phi n + h[0], phi n + p h[0] + (1-p) h[min(n+1, U)])

    Ties between the two actions resolve to "sample".
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"phi must lie in [0, 1], got {phi}")
    if c < 0:
        raise ValueError(f"sampling cost must be non-negative, got {c}")
    if U < 1:
        raise ValueError(f"U must be >= 1, got {U}")
    n = np.arange(U + 1, dtype=float)
    up = np.minimum(np.arange(U + 1) + 1, U)
    h = np.zeros(U + 1)

    def sweep(h):
        sample = c + phi * n + h[0]
        rest = phi * n + p * h[0] + (1.0 - p) * h[up]
        best = np.minimum(sample, rest)
        slack = TIE_TOL * np.maximum(1.0, np.abs(best))
        return best, sample <= rest + slack

    sp = np.inf
    it = 0
    while sp > epsilon:
        if it >= max_iterations:
            raise ConvergenceError(
                f"decoupled RVI did not converge in {max_iterations} iterations "
                f"(span {sp:.3g})", sp, it)
        th, _ = sweep(h)
        h_new = th - th[0]
        sp = span(h_new - h)
        h = h_new
        it += 1
    th, samples = sweep(h)
    hits = np.flatnonzero(samples)
    threshold = int(hits[0]) if hits.size else U
    saturated = threshold >= U
    return DecoupledSolution(h=h, gain=float(th[0]), threshold=threshold, sampling_cost=c,
                             saturated=saturated, samples=samples, iterations=it)


def threshold_of(phi: float, p: float, c: float, U: int = 50,
                 epsilon: float = DECOUPLED_EPSILON) -> int:
    return solve_decoupled(phi, p, c, U, epsilon).threshold


def empirical_whittle(n: int, phi: float, p: float, U: int | None = None,
                      epsilon: float = DECOUPLED_EPSILON) -> float:
    """Recover the Whittle index at counter ``n`` by bisection on the cost.

    Finds the cost at which the decoupled threshold moves from ``<= n`` to
    ``> n``; no closed form is involved.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if U is None:
        U = n + 20
    if U < n + 3:
        raise WhittleBracketError(f"U={U} is too small to bracket the index at n={n}")

    def above(c):
        sol = solve_decoupled(phi, p, c, U, epsilon)
        return sol.threshold > n, sol

    lo, hi = 0.0, max(1.0, phi * (n + 1) * (n + 2))
    for _ in range(60):
        ok, sol = above(hi)
        if ok:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise WhittleBracketError(f"no sampling cost pushes the threshold past n={n}")
    if sol.saturated and sol.threshold <= n + 1:
        raise WhittleBracketError(f"threshold saturates at U={U} before passing n={n}")
    width = 1e-6 * max(1.0, hi)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if above(mid)[0]:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
