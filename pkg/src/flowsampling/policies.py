"""Sampling policies: state-independent randomized rules and index rules.

Index computations are exposed as plain functions so they can be checked in
isolation; the ``choose_*`` functions turn them into actions (1-based device
indices).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Sequence

import numpy as np

from . import _kernels
from .model import PathConfig, _check_state

if TYPE_CHECKING:
    from .solver import RviSolution

DEFAULT_P_BAR = 0.3

POLICY_NAMES = ("uniform", "order-statistic", "weighted", "whittle",
                "second-order", "first-order", "heuristic", "optimal")
INDEX_POLICIES = ("whittle", "second-order", "first-order", "heuristic")


@dataclass(frozen=True)
class IndexValue:
    value: float
    device_index: int | None = None

    def __float__(self):
        return self.value


@dataclass(frozen=True)
class PolicySpec:
    """A named policy plus its parameters.

    ``weights`` for ``weighted`` may be left as ``None``; the harness then
    derives them by water-filling.  ``solution`` is required for ``optimal``.
    """

    kind: str
    G: int = 2
    weights: tuple[float, ...] | None = None
    p_bar: float = DEFAULT_P_BAR
    solution: Any = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in POLICY_NAMES:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {POLICY_NAMES}")
        if self.kind == "order-statistic" and int(self.G) < 1:
            raise ValueError(f"G must be >= 1, got {self.G}")
        if self.weights is not None:
            object.__setattr__(self, "weights", tuple(_check_weights(self.weights)))
        if not 0.0 <= self.p_bar <= 1.0:
            raise ValueError(f"p_bar must lie in [0, 1], got {self.p_bar}")

    @property
    def label(self) -> str:
        if self.kind == "order-statistic":
            return f"order-statistic(G={self.G})"
        if self.kind == "heuristic":
            return f"heuristic(p_bar={self.p_bar:g})"
        return self.kind


def _check_weights(weights: Sequence[float]) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-d sequence")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError(f"weights must be finite and non-negative, got {w}")
    if abs(w.sum() - 1.0) > 1e-9:
        raise ValueError(f"weights must sum to 1, got {w.sum()!r}")
    return w


def _check_unit(name: str, x: float):
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {x}")


def _check_counter(n: int):
    if int(n) != n or n < 0:
        raise ValueError(f"counter must be a non-negative integer, got {n}")


# -- state-independent policies ---------------------------------------------

def order_statistic_probabilities(M: int, G: int) -> np.ndarray:
    """``q_i = (i**G - (i-1)**G) / M**G`` evaluated in exact integers."""
    if M < 1 or G < 1:
        raise ValueError(f"need M >= 1 and G >= 1, got M={M}, G={G}")
    denom = M ** G
    return np.array([(i ** G - (i - 1) ** G) / denom for i in range(1, M + 1)])


def choose_uniform(M: int, rng: np.random.Generator) -> int:
    return int(rng.integers(1, M + 1))


def choose_order_statistic(M: int, G: int, rng: np.random.Generator) -> int:
    """Largest of ``G`` uniform draws from ``1..M`` (with replacement)."""
    if G < 1:
        raise ValueError(f"G must be >= 1, got {G}")
    return int(rng.integers(1, M + 1, size=G).max())


def choose_weighted(weights: Sequence[float], rng: np.random.Generator) -> int:
    w = _check_weights(weights)
    return int(rng.choice(w.size, p=w / w.sum())) + 1


# -- index policies -----------------------------------------------------------

def whittle_index(n: int, phi: float, p: float) -> IndexValue:
    """Closed-form Whittle index of a device with counter ``n``.

    For ``p <= 1e-9`` the ``p -> 0`` limit ``phi (n+1)(n+2) / 2`` is returned;
    otherwise ``(1-p)^(n+2) - 1`` is evaluated as ``expm1((n+2) log1p(-p))``
    to keep the O(p^2) bracket accurate.
    """
    _check_counter(n)
    _check_unit("phi", phi)
    _check_unit("p", p)
    return IndexValue(float(_kernels.whittle_value(int(n), float(phi), float(p))))


def second_order_index(n: int, phi: float) -> IndexValue:
    _check_counter(n)
    _check_unit("phi", phi)
    return IndexValue(phi * (n + 1) * (n + 2) / 2.0)


def first_order_index(n: int, phi: float) -> IndexValue:
    _check_counter(n)
    _check_unit("phi", phi)
    return IndexValue(phi * (n + 1.0))


def index_kinds(config: PathConfig, kind: str, p_bar: float = DEFAULT_P_BAR) -> np.ndarray:
    """Per-device index kind codes for an index policy name."""
    M = config.M
    if kind == "whittle":
        return np.full(M, _kernels.WHITTLE, dtype=np.int64)
    if kind == "second-order":
        return np.full(M, _kernels.SECOND_ORDER, dtype=np.int64)
    if kind == "first-order":
        return np.full(M, _kernels.FIRST_ORDER, dtype=np.int64)
    if kind == "heuristic":
        return np.where(config.p < p_bar, _kernels.SECOND_ORDER,
                        _kernels.FIRST_ORDER).astype(np.int64)
    raise ValueError(f"{kind!r} is not an index policy; expected one of {INDEX_POLICIES}")


def device_indices(state: Sequence[int], config: PathConfig, kind: str,
                   p_bar: float = DEFAULT_P_BAR) -> list[IndexValue]:
    state = _check_state(state, config.M)
    kinds = index_kinds(config, kind, p_bar)
    phi, p = config.phi, config.p
    return [IndexValue(float(_kernels.index_value(k, n, f, q)), i + 1)
            for i, (k, n, f, q) in enumerate(zip(kinds, state, phi, p))]


def choose_by_index(state: Sequence[int], config: PathConfig, kind: str,
                    p_bar: float = DEFAULT_P_BAR) -> int:
    """Device with the largest index.

    Ties go to the larger accuracy, then the larger counter, then the smaller
    device index.
    """
    state = _check_state(state, config.M)
    kinds = index_kinds(config, kind, p_bar)
    counters = np.asarray(state, dtype=np.int64)
    return int(_kernels.index_argmax(counters, config.phi, config.p, kinds)) + 1


def choose_from_table(state: Sequence[int], solution: "RviSolution") -> int:
    return solution.action(state)
