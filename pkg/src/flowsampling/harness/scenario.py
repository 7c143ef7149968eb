"""Scenario files: flat TOML key/value tables describing one experiment.

Grammar (every key optional unless noted)::

    M        = 40              # int, or a list of ints (``analyze`` only)
    sigma    = 0.8             # accuracies phi_i = sigma**(M-i)
    p        = 0.1             # float, or a list of M floats
    phi      = [0.64, 0.8, 1]  # explicit accuracies; M is taken from its length
    pi0      = 0.01            # alternating path: odd devices pi0,
    pi1      = 0.3             #   even devices pi1 (both required together)
    p_max    = 0.3             # random path: p_i ~ Uniform(0, p_max]
    policy   = "whittle"       # see flowsampling.policies.POLICY_NAMES
    G        = 2               # order-statistic draws; a list for ``analyze``
    p_bar    = 0.3             # heuristic threshold
    weights  = [0.2, 0.8]      # explicit weighted-policy probabilities
    T        = 100000          # horizon in slots
    reps     = 10              # replications
    burn_in  = 10000           # slots excluded from averaging
    seed     = 0               # master seed
    U        = 10              # counter cap of the solver
    epsilon  = 1e-6            # solver stopping span

At most one of ``pi0/pi1``, ``p_max`` and ``phi`` may be combined with the
homogeneous keys ``sigma``/``p``.  Errors name the offending key.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from ..model import PathConfig, geometric_accuracy_profile
from ..policies import POLICY_NAMES, PolicySpec
from ..solver import DEFAULT_EPSILON
from .simulate import ScenarioSpec, stream_seed


class ScenarioError(ValueError):
    def __init__(self, key: str | None, message: str):
        super().__init__(f"key {key!r}: {message}" if key else message)
        self.key = key


@dataclass(frozen=True)
class Scenario:
    M: tuple[int, ...] = (3,)
    sigma: float = 0.8
    p: float | tuple[float, ...] = 0.1
    phi: tuple[float, ...] | None = None
    pi0: float | None = None
    pi1: float | None = None
    p_max: float | None = None
    policy: str = "whittle"
    G: tuple[int, ...] = (2,)
    p_bar: float = 0.3
    weights: tuple[float, ...] | None = None
    T: int = 10**5
    reps: int = 10
    burn_in: int | None = None
    seed: int = 0
    U: int = 10
    epsilon: float = DEFAULT_EPSILON

    def with_seed(self, seed: int | None) -> "Scenario":
        if seed is None:
            return self
        return replace(self, seed=int(seed))

    def paths(self) -> list[PathConfig]:
        """One path per listed ``M`` value."""
        return [self._path(m) for m in self.M]

    def path(self) -> PathConfig:
        if len(self.M) != 1:
            raise ScenarioError("M", f"expected a single value here, got {list(self.M)}")
        return self._path(self.M[0])

    def _path(self, M: int) -> PathConfig:
        try:
            if self.phi is not None:
                return PathConfig.from_arrays(self.phi, _broadcast(self.p, M, "p"), self.U)
            if self.pi0 is not None:
                return PathConfig.alternating(M, self.sigma, self.pi0, self.pi1, self.U)
            if self.p_max is not None:
                rng = np.random.default_rng(stream_seed(self.seed, 2**32, M))
                p = self.p_max * (1.0 - rng.random(M))
                return PathConfig.from_arrays(geometric_accuracy_profile(M, self.sigma), p, self.U)
            return PathConfig.from_arrays(geometric_accuracy_profile(M, self.sigma),
                                          _broadcast(self.p, M, "p"), self.U)
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ScenarioError(None, f"invalid path: {exc}") from exc

    def policy_spec(self) -> PolicySpec:
        try:
            return PolicySpec(self.policy, G=self.G[0], weights=self.weights, p_bar=self.p_bar)
        except ValueError as exc:
            raise ScenarioError("policy", str(exc)) from exc

    def scenario_spec(self) -> ScenarioSpec:
        try:
            return ScenarioSpec(self.path(), self.policy_spec(), horizon=self.T,
                                replications=self.reps, burn_in=self.burn_in,
                                seed=self.seed, epsilon=self.epsilon)
        except ScenarioError:
            raise
        except ValueError as exc:
            raise ScenarioError("T", str(exc)) from exc


def _broadcast(p, M: int, key: str):
    if isinstance(p, tuple):
        if len(p) != M:
            raise ScenarioError(key, f"has {len(p)} entries for a path of {M} devices")
        return p
    return (p,) * M


# -- value checkers -----------------------------------------------------------

def _int(key, v, lo=None):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ScenarioError(key, f"expected an integer, got {v!r}")
    if lo is not None and v < lo:
        raise ScenarioError(key, f"must be >= {lo}, got {v}")
    return v


def _float(key, v, lo=None, hi=None):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(key, f"expected a number, got {v!r}")
    v = float(v)
    if (lo is not None and v < lo) or (hi is not None and v > hi):
        raise ScenarioError(key, f"must lie in [{lo}, {hi}], got {v}")
    return v


def _unit(key, v):
    return _float(key, v, 0.0, 1.0)


def _list_of(check, key, v):
    if not isinstance(v, list) or not v:
        raise ScenarioError(key, f"expected a non-empty list, got {v!r}")
    return tuple(check(key, x) for x in v)


def _int_or_list(key, v, lo):
    if isinstance(v, list):
        return _list_of(lambda k, x: _int(k, x, lo), key, v)
    return (_int(key, v, lo),)


def _policy(key, v):
    if v not in POLICY_NAMES:
        raise ScenarioError(key, f"unknown policy {v!r}; expected one of {', '.join(POLICY_NAMES)}")
    return v


_KEYS = {
    "M": lambda k, v: _int_or_list(k, v, 1),
    "sigma": lambda k, v: _float(k, v, 0.0, 1.0),
    "p": lambda k, v: _list_of(_unit, k, v) if isinstance(v, list) else _unit(k, v),
    "phi": lambda k, v: _list_of(_unit, k, v),
    "pi0": _unit,
    "pi1": _unit,
    "p_max": lambda k, v: _float(k, v, 0.0, 1.0),
    "policy": _policy,
    "G": lambda k, v: _int_or_list(k, v, 1),
    "p_bar": _unit,
    "weights": lambda k, v: _list_of(lambda k2, x: _float(k2, x, 0.0), k, v),
    "T": lambda k, v: _int(k, v, 1),
    "reps": lambda k, v: _int(k, v, 1),
    "burn_in": lambda k, v: _int(k, v, 0),
    "seed": lambda k, v: _int(k, v, 0),
    "U": lambda k, v: _int(k, v, 1),
    "epsilon": lambda k, v: _float(k, v, 1e-300),
}


def parse_scenario(data: dict[str, Any]) -> Scenario:
    """Validate a decoded key/value table and build a :class:`Scenario`."""
    fields: dict[str, Any] = {}
    for key, value in data.items():
        if key not in _KEYS:
            raise ScenarioError(key, f"unknown key; expected one of {', '.join(_KEYS)}")
        if isinstance(value, dict):
            raise ScenarioError(key, "nested tables are not allowed")
        fields[key] = _KEYS[key](key, value)

    if ("pi0" in fields) != ("pi1" in fields):
        raise ScenarioError("pi1" if "pi0" in fields else "pi0", "pi0 and pi1 must be given together")
    modes = [k for k in ("phi", "pi0", "p_max") if k in fields]
    if len(modes) > 1:
        raise ScenarioError(modes[1], f"cannot be combined with {modes[0]!r}")
    if "phi" in fields:
        m = len(fields["phi"])
        if "M" in fields and fields["M"] != (m,):
            raise ScenarioError("M", f"{list(fields['M'])} does not match the {m} entries of phi")
        fields["M"] = (m,)
        if "sigma" in fields:
            raise ScenarioError("sigma", "cannot be combined with 'phi'")
    if modes and modes[0] != "phi" and "p" in fields:
        raise ScenarioError("p", f"cannot be combined with {modes[0]!r}")
    if "epsilon" in fields and fields["epsilon"] <= 0:
        raise ScenarioError("epsilon", "must be positive")
    return Scenario(**fields)


_KEY_AT_LINE = re.compile(r"^\s*([A-Za-z0-9_\-]+)\s*=")
_LINE_NO = re.compile(r"line (\d+)")


def loads_scenario(text: str) -> Scenario:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        key = None
        m = _LINE_NO.search(str(exc))
        if m:
            lines = text.splitlines()
            idx = int(m.group(1)) - 1
            if 0 <= idx < len(lines):
                km = _KEY_AT_LINE.match(lines[idx])
                key = km.group(1) if km else None
        raise ScenarioError(key, f"malformed scenario file: {exc}") from exc
    return parse_scenario(data)


def load_scenario(path: str | Path) -> Scenario:
    return loads_scenario(Path(path).read_text())
