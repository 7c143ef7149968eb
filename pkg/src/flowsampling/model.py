"""Counter-state MDP for sampling the devices on one monitored flow path.

Each device ``i`` on the path carries a counter ``n_i``: the number of slots
since it was last sampled by *any* flow.  The controller of the flow under
study samples exactly one device per slot; every other device is reset by
foreign flows with probability ``p_i``.  Device indices are 1-based in every
public function, matching the ordering origin -> destination.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

CounterState = tuple[int, ...]


@dataclass(frozen=True)
class DeviceParams:
    """Accuracy ``phi`` and exogenous per-slot sampling probability ``p``."""

    phi: float
    p: float

    def __post_init__(self):
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"phi must lie in [0, 1], got {self.phi}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")


@dataclass(frozen=True)
class PathConfig:
    """Ordered devices of one flow path plus the solver counter cap ``U``."""

    devices: tuple[DeviceParams, ...]
    counter_cap: int = 10

    def __post_init__(self):
        object.__setattr__(self, "devices", tuple(self.devices))
        if len(self.devices) < 1:
            raise ValueError("a path needs at least one device")
        if int(self.counter_cap) < 1:
            raise ValueError(f"counter_cap must be >= 1, got {self.counter_cap}")
        if all(d.phi == 0.0 for d in self.devices):
            raise ValueError("at least one device must have phi > 0")

    @classmethod
    def from_arrays(cls, phi: Sequence[float], p: Sequence[float] | float,
                    counter_cap: int = 10) -> "PathConfig":
        phi = [float(x) for x in phi]
        if np.isscalar(p):
            p = [float(p)] * len(phi)
        if len(p) != len(phi):
            raise ValueError(f"phi has {len(phi)} entries but p has {len(p)}")
        return cls(tuple(DeviceParams(f, float(q)) for f, q in zip(phi, p)), counter_cap)

    @classmethod
    def homogeneous(cls, M: int, sigma: float, p: float, counter_cap: int = 10) -> "PathConfig":
        """Geometric accuracies ``sigma**(M-i)`` with a common ``p``."""
        return cls.from_arrays(geometric_accuracy_profile(M, sigma), p, counter_cap)

    @classmethod
    def alternating(cls, M: int, sigma: float, pi0: float, pi1: float,
                    counter_cap: int = 10) -> "PathConfig":
        """Odd-indexed devices get ``pi0``, even-indexed devices get ``pi1``."""
        p = [pi0 if i % 2 == 1 else pi1 for i in range(1, M + 1)]
        return cls.from_arrays(geometric_accuracy_profile(M, sigma), p, counter_cap)

    @property
    def M(self) -> int:
        return len(self.devices)

    @property
    def phi(self) -> np.ndarray:
        return np.array([d.phi for d in self.devices], dtype=float)

    @property
    def p(self) -> np.ndarray:
        return np.array([d.p for d in self.devices], dtype=float)

    def with_cap(self, counter_cap: int) -> "PathConfig":
        return PathConfig(self.devices, counter_cap)


def geometric_accuracy_profile(M: int, sigma: float) -> tuple[float, ...]:
    """Return ``(sigma**(M-1), ..., sigma, 1.0)``.

    >>> geometric_accuracy_profile(3, 0.5)
    (0.25, 0.5, 1.0)
    """
    if int(M) != M or M < 1:
        raise ValueError(f"M must be a positive integer, got {M}")
    if not 0.0 < sigma <= 1.0:
        raise ValueError(f"sigma must lie in (0, 1], got {sigma}")
    return tuple(float(sigma ** (M - i)) for i in range(1, int(M) + 1))


def _check_state(state: Sequence[int], M: int) -> CounterState:
    if len(state) != M:
        raise ValueError(f"state has {len(state)} counters, path has {M} devices")
    state = tuple(int(n) for n in state)
    if any(n < 0 for n in state):
        raise ValueError(f"counters must be non-negative, got {state}")
    return state


def _check_action(action: int, M: int) -> int:
    if not 1 <= action <= M:
        raise ValueError(f"action must be a device index in 1..{M}, got {action}")
    return int(action)


def step(state: Sequence[int], action: int, config: PathConfig,
         rng: np.random.Generator) -> CounterState:
    """Advance the counters by one slot.

    One uniform variate is drawn per device; the acted-on device ignores its
    draw.  Counters are not capped here.
    """
    state = _check_state(state, config.M)
    j = _check_action(action, config.M) - 1
    u = rng.random(config.M)
    p = config.p
    return tuple(
        0 if (i == j or u[i] < p[i]) else n + 1
        for i, n in enumerate(state)
    )


def transition_probability(state: Sequence[int], next_state: Sequence[int], action: int,
                           config: PathConfig, truncate: bool = False) -> float:
    """Probability of ``state -> next_state`` when device ``action`` is sampled.

    With ``truncate=True`` an increment ``n + 1`` is replaced by
    ``min(n + 1, U)``; if that coincides with 0 nothing changes since ``U >= 1``.
    """
    M = config.M
    state = _check_state(state, M)
    next_state = _check_state(next_state, M)
    j = _check_action(action, M) - 1
    if next_state[j] != 0:
        return 0.0
    U = config.counter_cap
    prob = 1.0
    for i, (n, n_next, dev) in enumerate(zip(state, next_state, config.devices)):
        if i == j:
            continue
        up = min(n + 1, U) if truncate else n + 1
        if n_next == 0:
            prob *= dev.p
        elif n_next == up:
            prob *= 1.0 - dev.p
        else:
            return 0.0
    return prob


def next_state_distribution(state: Sequence[int], action: int, config: PathConfig,
                            truncate: bool = False) -> dict[CounterState, float]:
    """Enumerate reachable next states with their probabilities."""
    M = config.M
    state = _check_state(state, M)
    j = _check_action(action, M) - 1
    U = config.counter_cap
    choices = []
    for i, n in enumerate(state):
        if i == j:
            choices.append(((0, 1.0),))
        else:
            p = config.devices[i].p
            up = min(n + 1, U) if truncate else n + 1
            choices.append(((0, p), (up, 1.0 - p)))
    dist: dict[CounterState, float] = {}
    for combo in itertools.product(*choices):
        s = tuple(v for v, _ in combo)
        dist[s] = dist.get(s, 0.0) + float(np.prod([w for _, w in combo]))
    return dist


def immediate_cost(state: Sequence[int], config: PathConfig) -> float:
    """Accuracy-weighted counter sum ``sum_i phi_i * n_i``."""
    state = _check_state(state, config.M)
    return float(sum(d.phi * n for d, n in zip(config.devices, state)))


def truncated_states(config: PathConfig) -> Iterator[CounterState]:
    """All states with every counter in ``0..U`` (row-major order)."""
    return itertools.product(range(config.counter_cap + 1), repeat=config.M)
