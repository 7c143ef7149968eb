"""Compiled inner loops shared by the policies and the Monte Carlo harness.

Every kernel that draws random numbers seeds numba's thread-local generator
itself, so a call is a pure function of its arguments.
"""
import math

import numpy as np
from numba import njit

P_TINY = 1e-9

# per-device index kinds
WHITTLE = 0
SECOND_ORDER = 1
FIRST_ORDER = 2

# action modes of the path simulators
MODE_RANDOM = 0
MODE_INDEX = 1
MODE_TABLE = 2


@njit(cache=True)
def whittle_value(n, phi, p):
    if p >= 1.0:
        return 0.0
    if p <= P_TINY:
        return phi * (n + 1) * (n + 2) / 2.0
    k = n + 2.0
    # (1-p)^k - 1 + k*p without forming (1-p)^k; the result is O(p^2)
    bracket = math.expm1(k * math.log1p(-p)) + k * p
    return phi * (1.0 - p) * bracket / (p * p)


@njit(cache=True)
def index_value(kind, n, phi, p):
    if kind == WHITTLE:
        return whittle_value(n, phi, p)
    if kind == SECOND_ORDER:
        return phi * (n + 1) * (n + 2) / 2.0
    return phi * (n + 1.0)


@njit(cache=True)
def index_argmax(counters, phi, p, kinds):
    """0-based argmax; ties -> larger phi, then larger n, then smaller index."""
    best = 0
    best_val = index_value(kinds[0], counters[0], phi[0], p[0])
    for i in range(1, counters.shape[0]):
        v = index_value(kinds[i], counters[i], phi[i], p[i])
        if v > best_val:
            best, best_val = i, v
        elif v == best_val:
            if phi[i] > phi[best] or (phi[i] == phi[best] and counters[i] > counters[best]):
                best, best_val = i, v
    return best


@njit(cache=True)
def index_table(kinds, phi, p, size):
    """``table[i, n]`` = index of device ``i`` at counter ``n < size``."""
    M = kinds.shape[0]
    out = np.empty((M, size))
    for i in range(M):
        for n in range(size):
            out[i, n] = index_value(kinds[i], n, phi[i], p[i])
    return out


@njit(cache=True)
def _tabled_argmax(counters, table, kinds, phi, p):
    # same ordering as index_argmax, reading precomputed values when possible
    size = table.shape[1]
    best = 0
    best_val = 0.0
    for i in range(counters.shape[0]):
        c = counters[i]
        v = table[i, c] if c < size else index_value(kinds[i], c, phi[i], p[i])
        if i == 0 or v > best_val:
            best, best_val = i, v
        elif v == best_val:
            if phi[i] > phi[best] or (phi[i] == phi[best] and counters[i] > counters[best]):
                best, best_val = i, v
    return best


@njit(cache=True)
def _pick(u, cum):
    # inverse CDF on cumulative weights
    lo = 0
    hi = cum.shape[0] - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if u < cum[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True)
def _table_action(counters, table, cap):
    idx = 0
    for i in range(counters.shape[0]):
        c = counters[i]
        if c > cap:
            c = cap
        idx = idx * (cap + 1) + c
    return table[idx]


@njit(cache=True)
def _gap(p):
    """Slots until the next success of a Bernoulli(p) process (>= 1)."""
    if p <= 0.0:
        return np.int64(2**62)
    if p >= 1.0:
        return np.int64(1)
    g = math.floor(math.log(1.0 - np.random.random()) / math.log1p(-p)) + 1.0
    return np.int64(g) if g < 2.0**62 else np.int64(2**62)


@njit(cache=True, nogil=True)
def simulate_path(phi, p, mode, cum, kinds, index_phi, index_p, table, cap,
                  horizon, burn_in, seed, zmax):
    """Run one replication from the all-zeros state.

    Foreign-flow resets of each device form a Bernoulli(p_i) process in
    time, generated by geometric gaps.  The generator yields one variate per
    slot for the action plus one per foreign event, independently of the
    policy, so policies run under the same seed see the same foreign events.
    """
    np.random.seed(seed)
    M = phi.shape[0]
    n = np.zeros(M, dtype=np.int64)
    last = np.full(M, -1, dtype=np.int64)
    nxt = np.empty(M, dtype=np.int64)
    for i in range(M):
        nxt[i] = _gap(p[i]) - 1
    itab = index_table(kinds, index_phi, index_p, 512 if mode == MODE_INDEX else 0)
    action_counts = np.zeros(M, dtype=np.int64)
    reset_counts = np.zeros(M, dtype=np.int64)
    hist = np.zeros((M, zmax + 1), dtype=np.int64)
    total = 0.0
    for t in range(horizon):
        u = np.random.random()
        if mode == MODE_RANDOM:
            a = _pick(u, cum)
        elif mode == MODE_INDEX:
            a = _tabled_argmax(n, itab, kinds, index_phi, index_p)
        else:
            a = _table_action(n, table, cap)
        measuring = t >= burn_in
        cost = 0.0
        for i in range(M):
            cost += phi[i] * n[i]
            hit = nxt[i] == t
            if hit:
                nxt[i] = t + _gap(p[i])
            if hit or i == a:
                if measuring:
                    reset_counts[i] += 1
                    if last[i] >= 0:
                        z = t - last[i]
                        hist[i, z if z < zmax else zmax] += 1
                last[i] = t
                n[i] = 0
            else:
                n[i] += 1
        if measuring:
            total += cost
            action_counts[a] += 1
    return total / (horizon - burn_in), action_counts, reset_counts, hist


@njit(cache=True, nogil=True)
def simulate_crosspoint(offsets, positions, phi, background_p, mode, cum, kinds,
                        index_p, horizon, seed, shared_view):
    """K flows in lockstep sharing one crosspoint device.

    Flow ``k`` owns devices ``offsets[k]:offsets[k+1]`` of the flat arrays and
    meets the crosspoint at local index ``positions[k]``.  The true counter of
    the crosspoint resets whenever any flow samples it; the returned array
    holds the gaps between consecutive resets.

    With ``shared_view`` every flow decides on that true counter.  Otherwise
    each flow keeps its own view of the crosspoint, reset by its own samples
    and by background events like any other device on its path.
    """
    np.random.seed(seed)
    K = positions.shape[0]
    total = offsets[K]
    n = np.zeros(total, dtype=np.int64)
    nxt = np.empty(total, dtype=np.int64)
    for j in range(total):
        nxt[j] = _gap(background_p[j]) - 1
    itab = index_table(kinds, phi, index_p, 512 if mode == MODE_INDEX else 0)
    shared = 0
    last = -1
    gaps = np.empty(horizon, dtype=np.int64)
    ngaps = 0
    actions = np.empty(K, dtype=np.int64)
    for t in range(horizon):
        for k in range(K):
            lo = offsets[k]
            hi = offsets[k + 1]
            if shared_view:
                n[lo + positions[k]] = shared
            u = np.random.random()
            if mode == MODE_RANDOM:
                actions[k] = _pick(u, cum[lo:hi])
            else:
                actions[k] = _tabled_argmax(n[lo:hi], itab[lo:hi], kinds[lo:hi],
                                            phi[lo:hi], index_p[lo:hi])
        hit = False
        for k in range(K):
            lo = offsets[k]
            if actions[k] == positions[k]:
                hit = True
            for i in range(offsets[k + 1] - lo):
                j = lo + i
                if shared_view and i == positions[k]:
                    continue
                ev = nxt[j] == t
                if ev:
                    nxt[j] = t + _gap(background_p[j])
                if ev or i == actions[k]:
                    n[j] = 0
                else:
                    n[j] += 1
        if hit:
            if last >= 0:
                gaps[ngaps] = t - last
                ngaps += 1
            last = t
            shared = 0
        else:
            shared += 1
    return gaps[:ngaps]
