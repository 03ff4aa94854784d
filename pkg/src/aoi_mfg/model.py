"""Agent types, scenario configuration, and the type-to-agent assignment.

Everything here is immutable after load and safe to share across parallel
Monte-Carlo workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    AssumptionViolationError,
    ConfigError,
    MissingKeyError,
    NonPositiveDefiniteError,
)

_PROB_TOL = 1e-12


def _as_matrix(value, name):
    m = np.atleast_2d(np.asarray(value, dtype=float))
    if m.ndim != 2:
        raise ConfigError(f"{name}: expected a scalar or 2-D matrix, got shape {m.shape}")
    return m


def _as_vector(value, n, name):
    v = np.atleast_1d(np.asarray(value, dtype=float)).ravel()
    if v.size != n:
        raise ConfigError(f"{name}: expected length {n}, got {v.size}")
    return v


def _check_spd(m, name, strict=True):
    if not np.allclose(m, m.T, atol=1e-10):
        raise NonPositiveDefiniteError(name, float("nan"))
    min_eig = float(np.linalg.eigvalsh(m).min())
    if (strict and min_eig <= 0.0) or (not strict and min_eig < -1e-12):
        raise NonPositiveDefiniteError(name, min_eig)


@dataclass(frozen=True)
class AgentType:
    """One agent type: dynamics, noise, cost weights, and population share.

    Scalars are stored as 1x1 matrices; A is n x n, B is n x m.
    """

    label: str
    A: np.ndarray
    B: np.ndarray
    C_W: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    x0_mean: np.ndarray
    x0_cov: np.ndarray
    prob: float

    def __post_init__(self):
        object.__setattr__(self, "A", _as_matrix(self.A, "A"))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ConfigError(f"type {self.label!r}: A must be square, got {self.A.shape}")
        B = _as_matrix(self.B, "B")
        if B.shape[0] != n:
            raise ConfigError(f"type {self.label!r}: B has {B.shape[0]} rows, expected {n}")
        object.__setattr__(self, "B", B)
        for name, strict in (("C_W", True), ("Q", False), ("R", True), ("x0_cov", True)):
            m = _as_matrix(getattr(self, name), name)
            want = (B.shape[1], B.shape[1]) if name == "R" else (n, n)
            if m.shape != want:
                raise ConfigError(f"type {self.label!r}: {name} has shape {m.shape}, expected {want}")
            _check_spd(m, f"{self.label}.{name}", strict=strict)
            object.__setattr__(self, name, m)
        object.__setattr__(self, "x0_mean", _as_vector(self.x0_mean, n, "x0_mean"))
        if not 0.0 <= self.prob <= 1.0:
            raise ConfigError(f"type {self.label!r}: prob {self.prob} outside [0, 1]")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def a_frob2(self) -> float:
        """||A||_F^2, the growth factor of the per-step estimation error."""
        return float(np.sum(self.A * self.A))

    def check_erasure_compatibility(self, p: float) -> None:
        value = self.a_frob2 * p
        if value >= 1.0:
            raise AssumptionViolationError(self.label, value)


@dataclass(frozen=True)
class ScenarioConfig:
    N: int
    capacity: int
    p: float
    T: int
    types: tuple[AgentType, ...]
    seed: int = 0
    mc_runs: int = 1
    bisection_eps: float = 1e-6

    def __post_init__(self):
        if self.N < 1:
            raise ConfigError(f"N must be >= 1, got {self.N}")
        if not 1 <= self.capacity < self.N:
            raise ConfigError(f"capacity must satisfy 1 <= C < N, got C={self.capacity}, N={self.N}")
        if not 0.0 <= self.p < 1.0:
            raise ConfigError(f"p must lie in [0, 1), got {self.p}")
        if self.T < 1:
            raise ConfigError(f"T must be >= 1, got {self.T}")
        if self.bisection_eps <= 0:
            raise ConfigError("bisection_eps must be > 0")
        total = sum(t.prob for t in self.types)
        if abs(total - 1.0) > _PROB_TOL:
            raise ConfigError(f"type probabilities sum to {total!r}, expected 1")
        for t in self.types:
            t.check_erasure_compatibility(self.p)

    @property
    def alpha(self) -> float:
        return self.capacity / self.N


@dataclass(frozen=True)
class Population:
    """Deterministic agent-to-type assignment for one scenario."""

    types: tuple[AgentType, ...]
    counts: tuple[int, ...]
    type_index: np.ndarray = field(repr=False)  # agent -> index into types

    @property
    def N(self) -> int:
        return int(self.type_index.size)

    def slices(self):
        """Contiguous agent slice per type, in type order."""
        out = []
        start = 0
        for c in self.counts:
            out.append(slice(start, start + c))
            start += c
        return out


def assign_types(N: int, types) -> Population:
    """Largest-remainder apportionment of N agents over the type distribution.

    Deterministic: |N_phi - N * P(phi)| < 1 for every type, ties broken by
    lower type index. Agents of one type occupy a contiguous index block.
    """
    types = tuple(types)
    if N < 1:
        raise ConfigError(f"N must be >= 1, got {N}")
    total = sum(t.prob for t in types)
    if abs(total - 1.0) > _PROB_TOL:
        raise ConfigError(f"type probabilities sum to {total!r}, expected 1")
    exact = np.array([N * t.prob for t in types])
    counts = np.floor(exact).astype(int)
    short = N - int(counts.sum())
    if short > 0:
        remainders = exact - counts
        # stable sort keeps lower index first on equal remainders
        order = np.argsort(-remainders, kind="stable")
        counts[order[:short]] += 1
    type_index = np.repeat(np.arange(len(types)), counts)
    return Population(types=types, counts=tuple(int(c) for c in counts), type_index=type_index)


_REQUIRED_TOP = ("N", "p", "T", "types")
_REQUIRED_TYPE = ("label", "A", "B", "C_W", "Q", "R", "x0_mean", "x0_cov", "prob")


def load_scenario(source) -> ScenarioConfig:
    """Build a validated ScenarioConfig from a dict, JSON string, or file path.

    Matrices are row-major nested arrays; scalars are accepted and promoted
    to 1x1. Either `capacity` or `alpha` must be present.
    """
    if isinstance(source, (str, Path)):
        text = Path(source).read_text() if Path(str(source)).exists() else str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    elif isinstance(source, dict):
        doc = source
    else:
        raise ConfigError(f"unsupported config source type: {type(source)!r}")

    for key in _REQUIRED_TOP:
        if key not in doc:
            raise MissingKeyError(key)
    if "capacity" not in doc and "alpha" not in doc:
        raise MissingKeyError("capacity | alpha")

    N = int(doc["N"])
    if "capacity" in doc:
        capacity = int(doc["capacity"])
    else:
        capacity = max(1, int(float(doc["alpha"]) * N + 1e-9))

    types = []
    for i, tdoc in enumerate(doc["types"]):
        for key in _REQUIRED_TYPE:
            if key not in tdoc:
                raise MissingKeyError(f"types[{i}].{key}")
        types.append(AgentType(
            label=str(tdoc["label"]),
            A=tdoc["A"], B=tdoc["B"], C_W=tdoc["C_W"], Q=tdoc["Q"], R=tdoc["R"],
            x0_mean=tdoc["x0_mean"], x0_cov=tdoc["x0_cov"], prob=float(tdoc["prob"]),
        ))

    return ScenarioConfig(
        N=N,
        capacity=capacity,
        p=float(doc["p"]),
        T=int(doc["T"]),
        types=tuple(types),
        seed=int(doc.get("seed", 0)),
        mc_runs=int(doc.get("mc_runs", 1)),
        bisection_eps=float(doc.get("bisection_eps", 1e-6)),
    )


def population_for(config: ScenarioConfig) -> Population:
    return assign_types(config.N, config.types)
