"""Desk-scale scenario grids for the reference experiments, emitted as CSV rows.

Every figure yields rows with the columns in :data:`COLUMNS`.  ``analytic``
holds a closed-form or solver value where one exists and ``simulated`` a
Monte Carlo mean with its standard error.  Empty cells are written as ``""``.

=====  ==============================================================
S1     M=3, sigma=0.8, homogeneous p grid: optimal, Whittle, uniform, bound
S2     M grid, sigma=0.8, p=0.1: state-independent policies, Whittle, bound
S3     M=40, alternating pi0=0.01 / pi1 grid: Whittle, second-order, heuristic
R1/R2  M=3, p_i ~ U(0, p], sigma 0.1 / 0.8: optimal, Whittle, uniform, bound
R3/R4  homogeneous p grid, M 5 / 40, sigma in {0.2, 0.5, 0.8}: Whittle, second-order
G      crosspoint experiment: empirical PMF of Z against the fitted geometric
=====  ==============================================================
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np

from ..analysis import (cost_order_statistic, cost_uniform, cost_weighted, geometric_fit,
                        lower_bound, water_filling)
from ..model import PathConfig, geometric_accuracy_profile
from ..policies import PolicySpec
from ..solver import relative_value_iteration
from .simulate import CrosspointSpec, ScenarioSpec, simulate, simulate_crosspoint, stream_seed

SCHEMA = 1
COLUMNS = ("figure", "param", "value", "M", "sigma", "policy", "analytic", "simulated", "stderr")
FIGURES = ("S1", "S2", "S3", "R1", "R2", "R3", "R4", "G")

S1_P = (0.025, 0.05, 0.1, 0.15, 0.2)
S2_M = (5, 10, 20, 50, 100, 200)
S3_PI1 = tuple(round(0.05 * k, 2) for k in range(1, 13))
R_P = (0.1, 0.2, 0.3, 0.4, 0.5)
R_SIGMA = (0.2, 0.5, 0.8)
R_DRAWS = 20
R_CAP = 20
G_POLICIES = ("uniform", "order-statistic", "whittle", "second-order")
G_ZMAX = 30


@dataclass(frozen=True)
class Budget:
    """Simulation effort per grid point."""

    horizon: int = 10**5
    replications: int = 20
    threads: int = 1
    crosspoint_horizon: int = 5 * 10**5


Row = dict


def _row(figure, param, value, M, sigma, policy, analytic=None, simulated=None, stderr=None) -> Row:
    return dict(figure=figure, param=param, value=value, M=M, sigma=sigma, policy=policy,
                analytic=analytic, simulated=simulated, stderr=stderr)


def _sim(path: PathConfig, policy: PolicySpec, budget: Budget, seed: int):
    rep = simulate(ScenarioSpec(path, policy, horizon=budget.horizon,
                                replications=budget.replications, seed=seed),
                   threads=budget.threads)
    return rep.mean_cost, rep.cost_stderr


def figure_s1(seed: int, budget: Budget) -> Iterable[Row]:
    M, sigma = 3, 0.8
    for k, p in enumerate(S1_P):
        path = PathConfig.homogeneous(M, sigma, p, counter_cap=10)
        sol = relative_value_iteration(path)
        s = stream_seed(seed, k)
        yield _row("S1", "p", p, M, sigma, "optimal", sol.gain,
                   *_sim(path, PolicySpec("optimal", solution=sol), budget, s))
        yield _row("S1", "p", p, M, sigma, "whittle", None, *_sim(path, PolicySpec("whittle"), budget, s))
        yield _row("S1", "p", p, M, sigma, "uniform", cost_uniform(path),
                   *_sim(path, PolicySpec("uniform"), budget, s))
        yield _row("S1", "p", p, M, sigma, "lower-bound", lower_bound(path))


def figure_s2(seed: int, budget: Budget) -> Iterable[Row]:
    sigma, p = 0.8, 0.1
    for k, M in enumerate(S2_M):
        path = PathConfig.homogeneous(M, sigma, p)
        s = stream_seed(seed, k)
        w = water_filling(path).weights
        cases = [
            ("uniform", PolicySpec("uniform"), cost_uniform(path)),
            ("order-statistic(G=2)", PolicySpec("order-statistic", G=2), cost_order_statistic(path, 2)),
            ("order-statistic(G=3)", PolicySpec("order-statistic", G=3), cost_order_statistic(path, 3)),
            ("weighted", PolicySpec("weighted", weights=tuple(w)), cost_weighted(path, w)),
            ("whittle", PolicySpec("whittle"), None),
        ]
        for name, policy, analytic in cases:
            yield _row("S2", "M", M, M, sigma, name, analytic, *_sim(path, policy, budget, s))
        yield _row("S2", "M", M, M, sigma, "lower-bound", lower_bound(path))


def figure_s3(seed: int, budget: Budget) -> Iterable[Row]:
    M, sigma, pi0 = 40, 0.8, 0.01
    for k, pi1 in enumerate(S3_PI1):
        path = PathConfig.alternating(M, sigma, pi0, pi1)
        s = stream_seed(seed, k)
        for policy in (PolicySpec("whittle"), PolicySpec("second-order"), PolicySpec("heuristic")):
            yield _row("S3", "pi1", pi1, M, sigma, policy.label, None, *_sim(path, policy, budget, s))


def _random_paths(sigma: float, p_max: float, seed: int, draws: int) -> list[PathConfig]:
    phi = geometric_accuracy_profile(3, sigma)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31 + 1,)))
    # p_i ~ Uniform(0, p_max]
    return [PathConfig.from_arrays(phi, p_max * (1.0 - rng.random(3)), R_CAP) for _ in range(draws)]


def _mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else math.nan


def figure_r12(figure: str, sigma: float, seed: int, budget: Budget) -> Iterable[Row]:
    """Averages over ``R_DRAWS`` random paths; the standard error is taken across draws."""
    M = 3
    one_rep = Budget(budget.horizon, max(1, budget.replications // R_DRAWS), budget.threads)
    for k, p_max in enumerate(R_P):
        paths = _random_paths(sigma, p_max, stream_seed(seed, k), R_DRAWS)
        gains, opt, whittle, uni, uni_an, lb = [], [], [], [], [], []
        for d, path in enumerate(paths):
            s = stream_seed(seed, k, d)
            sol = relative_value_iteration(path)
            gains.append(sol.gain)
            opt.append(_sim(path, PolicySpec("optimal", solution=sol), one_rep, s)[0])
            whittle.append(_sim(path, PolicySpec("whittle"), one_rep, s)[0])
            uni.append(_sim(path, PolicySpec("uniform"), one_rep, s)[0])
            uni_an.append(cost_uniform(path))
            lb.append(lower_bound(path))
        yield _row(figure, "p", p_max, M, sigma, "optimal", float(np.mean(gains)), *_mean_se(opt))
        yield _row(figure, "p", p_max, M, sigma, "whittle", None, *_mean_se(whittle))
        yield _row(figure, "p", p_max, M, sigma, "uniform", float(np.mean(uni_an)), *_mean_se(uni))
        yield _row(figure, "p", p_max, M, sigma, "lower-bound", float(np.mean(lb)))


def figure_r34(figure: str, M: int, seed: int, budget: Budget) -> Iterable[Row]:
    for i, sigma in enumerate(R_SIGMA):
        for k, p in enumerate(R_P):
            path = PathConfig.homogeneous(M, sigma, p)
            s = stream_seed(seed, i, k)
            for policy in (PolicySpec("whittle"), PolicySpec("second-order")):
                yield _row(figure, "p", p, M, sigma, policy.label, None, *_sim(path, policy, budget, s))


def figure_g(seed: int, budget: Budget) -> Iterable[Row]:
    """Per policy: PMF rows for ``z = 1..G_ZMAX`` and a summary ``tv`` row."""
    for name in G_POLICIES:
        policy = PolicySpec(name)
        z = simulate_crosspoint(CrosspointSpec(policy=policy, horizon=budget.crosspoint_horizon,
                                               seed=seed))
        fit = geometric_fit(z)
        counts = np.bincount(z, minlength=G_ZMAX + 1)[1:G_ZMAX + 1]
        for zi, c in enumerate(counts, start=1):
            geo = (1.0 - fit.p_hat) ** (zi - 1) * fit.p_hat
            emp = c / z.size
            yield _row("G", "z", zi, None, 0.9, policy.label, geo, emp,
                       math.sqrt(emp * (1.0 - emp) / z.size))
        yield _row("G", "tv", fit.sample_count, None, 0.9, policy.label, None, fit.tv_distance)


def reproduce(figure_id: str, seed: int = 0, budget: Budget | None = None) -> list[Row]:
    """Rows of the named figure's scenario grid."""
    budget = budget or Budget()
    builders: dict[str, Callable[[], Iterable[Row]]] = {
        "S1": lambda: figure_s1(seed, budget),
        "S2": lambda: figure_s2(seed, budget),
        "S3": lambda: figure_s3(seed, budget),
        "R1": lambda: figure_r12("R1", 0.1, seed, budget),
        "R2": lambda: figure_r12("R2", 0.8, seed, budget),
        "R3": lambda: figure_r34("R3", 5, seed, budget),
        "R4": lambda: figure_r34("R4", 40, seed, budget),
        "G": lambda: figure_g(seed, budget),
    }
    key = figure_id.upper()
    if key not in builders:
        raise ValueError(f"unknown figure {figure_id!r}; expected one of {', '.join(FIGURES)}")
    return list(builders[key]())


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(rows: Iterable[Row], stream: io.TextIOBase, columns=COLUMNS):
    """CSV with a ``# schema=N`` comment line ahead of the header."""
    stream.write(f"# schema={SCHEMA}\n")
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
