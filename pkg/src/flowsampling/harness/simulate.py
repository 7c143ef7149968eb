"""Monte Carlo evaluation of a policy on one flow path, and the crosspoint experiment."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..analysis import water_filling
from ..model import PathConfig
from ..policies import (INDEX_POLICIES, PolicySpec, index_kinds,
                        order_statistic_probabilities)
from ..solver import DEFAULT_EPSILON, relative_value_iteration

log = logging.getLogger(__name__)

ZMAX = 256


def stream_seed(master: int, *key: int) -> int:
    """32-bit seed for the stream ``key`` (replication, flow, ...) of ``master``.

    Derived with :class:`numpy.random.SeedSequence` so streams are independent
    of the order in which they are consumed.
    """
    ss = np.random.SeedSequence(int(master) & (2**64 - 1), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint32)[0])


@dataclass(frozen=True)
class ScenarioSpec:
    path: PathConfig
    policy: PolicySpec
    horizon: int = 10**5
    replications: int = 10
    burn_in: int | None = None
    seed: int = 0
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.burn_in is None:
            object.__setattr__(self, "burn_in", self.horizon // 10)
        if not self.horizon > self.burn_in >= 0:
            raise ValueError(f"need horizon > burn_in >= 0, got {self.horizon}, {self.burn_in}")
        if self.replications < 1:
            raise ValueError(f"replications must be >= 1, got {self.replications}")


@dataclass
class SimulationReport:
    mean_cost: float
    cost_stderr: float
    per_device_sampling_rate: np.ndarray
    per_device_reset_rate: np.ndarray
    intersample_histograms: np.ndarray
    replication_costs: np.ndarray
    seed: int
    slots_simulated: int
    burn_in: int
    policy: str = ""
    weights: np.ndarray | None = field(default=None, repr=False)


def _action_setup(path: PathConfig, policy: PolicySpec, epsilon: float):
    """Kernel arguments ``(mode, cum, kinds, table, cap, weights)`` for a policy."""
    M = path.M
    no_table = np.zeros(1, dtype=np.int64)
    no_kinds = np.zeros(M, dtype=np.int64)
    kind = policy.kind
    if kind in ("uniform", "order-statistic", "weighted"):
        if kind == "uniform":
            w = np.full(M, 1.0 / M)
        elif kind == "order-statistic":
            w = order_statistic_probabilities(M, policy.G)
        elif policy.weights is not None:
            w = np.asarray(policy.weights, dtype=float)
            if w.size != M:
                raise ValueError(f"{w.size} weights for a path of {M} devices")
        else:
            w = water_filling(path).weights
        cum = np.cumsum(w)
        cum[-1] = np.inf
        return _kernels.MODE_RANDOM, cum, no_kinds, no_table, 1, w
    if kind in INDEX_POLICIES:
        return (_kernels.MODE_INDEX, np.zeros(M), index_kinds(path, kind, policy.p_bar),
                no_table, 1, None)
    sol = policy.solution
    if sol is None:
        sol = relative_value_iteration(path, epsilon)
    if sol.config.M != M:
        raise ValueError(f"policy table is for {sol.config.M} devices, path has {M}")
    table = (np.ascontiguousarray(sol.policy).ravel() - 1).astype(np.int64)
    return _kernels.MODE_TABLE, np.zeros(M), no_kinds, table, sol.counter_cap, None


def simulate(spec: ScenarioSpec, threads: int = 1) -> SimulationReport:
    """Run ``spec.replications`` independent replications from the all-zeros state.

    The mean cost is the time average of ``sum_i phi_i n_i`` over slots
    ``burn_in..horizon-1``, averaged over replications; the standard error is
    taken across replications.  Results depend only on ``spec`` (including
    its seed), not on ``threads``.
    """
    path, policy = spec.path, spec.policy
    mode, cum, kinds, table, cap, weights = _action_setup(path, policy, spec.epsilon)
    phi = path.phi
    p = path.p

    def one(r):
        return _kernels.simulate_path(phi, p, mode, cum, kinds, phi, p, table, cap,
                                      spec.horizon, spec.burn_in, stream_seed(spec.seed, r), ZMAX)

    reps = range(spec.replications)
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            results = list(pool.map(one, reps))
    else:
        results = [one(r) for r in reps]

    costs = np.array([r[0] for r in results])
    measured = spec.horizon - spec.burn_in
    slots = measured * spec.replications
    actions = np.sum([r[1] for r in results], axis=0)
    resets = np.sum([r[2] for r in results], axis=0)
    hist = np.sum([r[3] for r in results], axis=0)
    stderr = float(costs.std(ddof=1) / math.sqrt(costs.size)) if costs.size > 1 else math.nan
    return SimulationReport(
        mean_cost=float(costs.mean()),
        cost_stderr=stderr,
        per_device_sampling_rate=actions / slots,
        per_device_reset_rate=resets / slots,
        intersample_histograms=hist,
        replication_costs=costs,
        seed=spec.seed,
        slots_simulated=spec.horizon * spec.replications,
        burn_in=spec.burn_in,
        policy=policy.label,
        weights=weights,
    )


# -- crosspoint experiment ---------------------------------------------------

@dataclass(frozen=True)
class CrosspointSpec:
    """``K`` flows of random length crossing one shared device.

    Index policies rank each flow's devices with accuracies
    ``index_sigma**(M_k - i)`` and an assumed ``index_p`` per device.  The
    devices of every flow are also reset by background traffic with
    probability ``background_p``.  ``shared_view`` makes every flow decide on
    the true crosspoint counter instead of its own view of it.
    """

    flow_count: int = 20
    length_range: tuple[int, int] = (3, 200)
    policy: PolicySpec = PolicySpec("uniform")
    horizon: int = 3 * 10**5
    seed: int = 0
    index_sigma: float = 0.9
    index_p: float = 0.3
    background_p: float = 0.3
    shared_view: bool = False
    lengths: tuple[int, ...] | None = None
    positions: tuple[int, ...] | None = None  # 1-based crosspoint position per flow

    def __post_init__(self):
        if self.flow_count < 1:
            raise ValueError(f"flow_count must be >= 1, got {self.flow_count}")
        lo, hi = self.length_range
        if not 1 <= lo <= hi:
            raise ValueError(f"bad length range {self.length_range}")

    def layout(self) -> tuple[np.ndarray, np.ndarray]:
        """Path lengths and 1-based crosspoint positions (drawn from the seed if not given)."""
        rng = np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(2**31,)))
        K = self.flow_count
        if self.lengths is not None:
            lengths = np.asarray(self.lengths, dtype=np.int64)
        else:
            lengths = rng.integers(self.length_range[0], self.length_range[1] + 1, size=K)
        if self.positions is not None:
            positions = np.asarray(self.positions, dtype=np.int64)
        else:
            positions = np.array([rng.integers(1, m + 1) for m in lengths], dtype=np.int64)
        if lengths.size != K or positions.size != K:
            raise ValueError(f"need {K} lengths and positions")
        if np.any(positions < 1) or np.any(positions > lengths):
            raise ValueError(f"crosspoint positions {positions} out of range for lengths {lengths}")
        return lengths, positions


def simulate_crosspoint(spec: CrosspointSpec) -> np.ndarray:
    """Inter-sampling times of the shared device over ``spec.horizon`` slots."""
    lengths, positions = spec.layout()
    policy = spec.policy
    offsets = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    phi, cum, kinds = [], [], []
    for m in lengths:
        cfg = PathConfig.homogeneous(int(m), spec.index_sigma, spec.index_p)
        phi.append(cfg.phi)
        if policy.kind == "uniform":
            w = np.full(m, 1.0 / m)
        elif policy.kind == "order-statistic":
            w = order_statistic_probabilities(int(m), policy.G)
        elif policy.kind == "weighted":
            w = water_filling(cfg).weights
        elif policy.kind in INDEX_POLICIES:
            w = np.full(m, 1.0 / m)
            kinds.append(index_kinds(cfg, policy.kind, policy.p_bar))
        else:
            raise ValueError(f"policy {policy.kind!r} is not supported in the crosspoint experiment")
        c = np.cumsum(w)
        c[-1] = np.inf
        cum.append(c)
    mode = _kernels.MODE_INDEX if policy.kind in INDEX_POLICIES else _kernels.MODE_RANDOM
    total = int(offsets[-1])
    kinds_arr = np.concatenate(kinds) if kinds else np.zeros(total, dtype=np.int64)
    return _kernels.simulate_crosspoint(
        offsets, positions - 1, np.concatenate(phi), np.full(total, spec.background_p),
        mode, np.concatenate(cum), kinds_arr, np.full(total, spec.index_p),
        spec.horizon, stream_seed(spec.seed, 0), spec.shared_view)
