"""Independent reference computations used by the tests.

Nothing here imports the package's solver or analysis code: transitions are
enumerated subset by subset, optimal gains come from policy iteration with
dense linear solves, and stationary costs from explicit Markov chains.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


def enumerate_successors(state, action, phi, p, cap=None):
    """All ``(next_state, prob)`` pairs; ``action`` is 0-based."""
    M = len(state)
    others = [i for i in range(M) if i != action]
    out = {}
    for resets in itertools.product((False, True), repeat=len(others)):
        prob = 1.0
        nxt = list(state)
        nxt[action] = 0
        for i, r in zip(others, resets):
            if r:
                prob *= p[i]
                nxt[i] = 0
            else:
                prob *= 1.0 - p[i]
                nxt[i] = state[i] + 1 if cap is None else min(state[i] + 1, cap)
        if prob > 0:
            out[tuple(nxt)] = out.get(tuple(nxt), 0.0) + prob
    return out


def grid(M, cap):
    return list(itertools.product(range(cap + 1), repeat=M))


def dense_kernels(phi, p, cap):
    """``P[a]`` as dense matrices over the truncated grid plus the cost vector."""
    M = len(phi)
    states = grid(M, cap)
    index = {s: k for k, s in enumerate(states)}
    S = len(states)
    P = np.zeros((M, S, S))
    for k, s in enumerate(states):
        for a in range(M):
            for nxt, pr in enumerate_successors(s, a, phi, p, cap).items():
                P[a, k, index[nxt]] += pr
    cost = np.array([sum(f * n for f, n in zip(phi, s)) for s in states])
    return states, P, cost


def evaluate(P_pol, cost, ref=0):
    """Gain and bias of a unichain policy: ``g + h = c + P h``, ``h[ref] = 0``."""
    S = cost.size
    A = np.zeros((S + 1, S + 1))
    A[:S, :S] = np.eye(S) - P_pol
    A[:S, S] = 1.0
    A[S, ref] = 1.0
    rhs = np.concatenate([cost, [0.0]])
    x = np.linalg.lstsq(A, rhs, rcond=None)[0]
    return x[S], x[:S]


def policy_iteration(phi, p, cap, max_iter=200):
    """Howard policy iteration on the truncated MDP; returns (gain, actions)."""
    states, P, cost = dense_kernels(phi, p, cap)
    S = len(states)
    pol = np.zeros(S, dtype=int)
    for _ in range(max_iter):
        g, h = evaluate(P[pol, np.arange(S)], cost)
        q = cost[None, :] + P @ h
        best = q.min(axis=0)
        # keep the current action unless another is strictly better
        keep = q[pol, np.arange(S)] <= best + 1e-10 * max(1.0, abs(g))
        new = np.where(keep, pol, q.argmin(axis=0))
        if np.array_equal(new, pol):
            return g, pol
        pol = new
    raise RuntimeError("policy iteration did not converge")


def stationary_cost_of_table(phi, p, cap, actions):
    """Average cost of a table policy (0-based actions on the grid)."""
    states, P, cost = dense_kernels(phi, p, cap)
    S = len(states)
    g, _ = evaluate(P[actions, np.arange(S)], cost)
    return g


def counter_chain_mean(q, p, nmax=4000):
    """Stationary mean of one counter reset w.p. ``1-(1-q)(1-p)`` (truncated chain)."""
    stay = (1.0 - q) * (1.0 - p)
    pi = stay ** np.arange(nmax)
    pi /= pi.sum()
    return float(np.dot(np.arange(nmax), pi))


def order_statistic_enumerated(M, G):
    """Distribution of the max of G uniform draws on 1..M by full enumeration."""
    counts = np.zeros(M)
    for draw in itertools.product(range(M), repeat=G):
        counts[max(draw)] += 1
    return counts / M ** G


def water_filling_kkt_gap(phi, p, w):
    """Max violation of the KKT conditions of min sum phi(1/((1-p)a+p) - 1) on the simplex."""
    phi, p, w = map(np.asarray, (phi, p, w))
    grad = -phi * (1.0 - p) / ((1.0 - p) * w + p) ** 2
    active = w > 1e-12
    lam = -grad[active].mean()
    viol_active = np.max(np.abs(-grad[active] - lam)) / lam
    inactive = ~active
    viol_inactive = 0.0 if not inactive.any() else max(0.0, np.max(-grad[inactive] - lam) / lam)
    return max(viol_active, viol_inactive), abs(w.sum() - 1.0)


def single_device_gain(phi, p, c, threshold, nmax=3000):
    """Average cost of 'sample once n >= threshold' from the explicit counter chain."""
    # states 0..nmax, sampling at n >= threshold resets to 0
    pi = np.zeros(nmax + 1)
    pi[0] = 1.0
    for n in range(1, nmax + 1):
        pi[n] = pi[n - 1] * (1.0 - p) if n - 1 < threshold else 0.0
    pi /= pi.sum()
    n = np.arange(nmax + 1)
    sample_rate = pi[n >= threshold].sum()
    return float(np.dot(pi, phi * n) + c * sample_rate)


def geometric_draws(p, size, seed):
    return np.random.default_rng(seed).geometric(p, size=size)


def whittle_closed_form(n, phi, p):
    """Plain-float evaluation used only for moderate p."""
    return phi * (1 - p) / p ** 2 * ((1 - p) ** (n + 2) + (n + 2) * p - 1)


def total_variation(a, b):
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def isclose(a, b, rel=1e-9, abs_=0.0):
    return math.isclose(a, b, rel_tol=rel, abs_tol=abs_)
