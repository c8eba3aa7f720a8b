"""Layered expert structures: assembly, round loop, traces and regret accounting.

Decision layer 0 is the top strategy, decision layer k (1 <= k <= R) holds the
L_k experts of layer k. The children of decision layer d are the experts of
layer d + 1, or the arms when d == R. Every index is 0-based.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernel
from .arms import ArmSet, sample
from .policies import (
    KIND_CODES,
    PolicyKind,
    PolicySpec,
    PolicyState,
    new_state,
    select,
    update,
)


class ObservationMode(str, Enum):
    SHARED = "Shared"
    LOCAL = "Local"


class Clock(str, Enum):
    GLOBAL = "Global"
    LOCAL = "Local"


class HierarchyError(ValueError):
    pass


@dataclass(frozen=True)
class HierarchySpec:
    """Top strategy plus R layers of experts.

    In shared observation mode every expert of a layer reads the pooled
    counts and reward sums of the next layer; in local mode each expert only
    sees its own selections.
    """

    top: PolicySpec
    layers: tuple[tuple[PolicySpec, ...], ...] = ()
    observation_mode: ObservationMode = ObservationMode.SHARED
    clock: Clock = Clock.GLOBAL

    def __post_init__(self):
        layers = tuple(tuple(layer) for layer in self.layers)
        object.__setattr__(self, "layers", layers)
        object.__setattr__(self, "observation_mode", ObservationMode(self.observation_mode))
        object.__setattr__(self, "clock", Clock(self.clock))
        for k, layer in enumerate(layers, start=1):
            if not layer:
                raise HierarchyError(f"layer {k} has no experts")

    @property
    def R(self) -> int:
        return len(self.layers)

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(len(layer) for layer in self.layers)

    @property
    def shared(self) -> bool:
        return self.observation_mode is ObservationMode.SHARED

    def selectors(self, d: int) -> tuple[PolicySpec, ...]:
        return (self.top,) if d == 0 else self.layers[d - 1]

    def num_children(self, d: int, n_arms: int) -> int:
        return n_arms if d == self.R else len(self.layers[d])

    def validate(self, n_arms: int) -> None:
        """Check every BadFixed target against the size of the next layer."""
        for d in range(self.R + 1):
            n_child = self.num_children(d, n_arms)
            for j, policy in enumerate(self.selectors(d)):
                if policy.kind is PolicyKind.BAD_FIXED and policy.target >= n_child:
                    where = "top" if d == 0 else f"layers[{d - 1}][{j}]"
                    raise HierarchyError(
                        f"{where}: BadFixed target {policy.target} out of range "
                        f"for {n_child} children"
                    )

    def with_layers(self, layers) -> "HierarchySpec":
        return HierarchySpec(self.top, layers, self.observation_mode, self.clock)

    def to_dict(self) -> dict:
        return {
            "top": self.top.to_dict(),
            "layers": [[p.to_dict() for p in layer] for layer in self.layers],
            "observation_mode": self.observation_mode.value,
            "clock": self.clock.value,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HierarchySpec":
        return cls(
            top=PolicySpec.from_dict(doc["top"]),
            layers=tuple(tuple(PolicySpec.from_dict(p) for p in layer) for layer in doc.get("layers", [])),
            observation_mode=doc.get("observation_mode", "Shared"),
            clock=doc.get("clock", "Global"),
        )


def ucb_hierarchy(beta, alphas, **kwargs) -> HierarchySpec:
    """All-UCB structure from a top parameter and per-layer expert parameters."""
    return HierarchySpec(
        PolicySpec.ucb(beta),
        tuple(tuple(PolicySpec.ucb(a) for a in layer) for layer in alphas),
        **kwargs,
    )


def bad_expert_hierarchy(R: int, n_arms: int, alpha: float = 3.0, beta: float | None = None) -> HierarchySpec:
    """Each layer: one alpha-UCB expert and two fixed-target experts.

    Above the bottom the fixed experts always pick the third expert of the
    next layer; at the bottom they always pull the worst arm.
    """
    if R < 1:
        raise HierarchyError("the bad-expert construction needs R >= 1")
    layers = []
    for k in range(1, R + 1):
        target = n_arms - 1 if k == R else 2
        layers.append((PolicySpec.ucb(alpha), PolicySpec.bad(target), PolicySpec.bad(target)))
    return HierarchySpec(PolicySpec.ucb(alpha if beta is None else beta), tuple(layers))


# Parameters of the worked two-layer example (experts ordered by parameter).
EXAMPLE_BETA = 5.75
EXAMPLE_ALPHAS = ((4.04, 5.33, 7.24, 8.32), (2.33, 5.22, 5.27, 7.29, 8.41))


def example_hierarchy() -> HierarchySpec:
    return ucb_hierarchy(EXAMPLE_BETA, EXAMPLE_ALPHAS)


@dataclass
class RunTrace:
    """Complete record of one run.

    ``path[t, d]`` is the child chosen at decision layer d in round t + 1; the
    last column is the arm. ``pair_counts[d][j, c]`` counts rounds in which
    selector j of decision layer d picked child c.
    """

    n: int
    path: np.ndarray
    reward: np.ndarray
    pair_counts: list[np.ndarray]
    arm_means: np.ndarray
    cumulative_pseudo_regret: np.ndarray = field(init=False)

    def __post_init__(self):
        gaps = self.arm_means[0] - self.arm_means
        self.cumulative_pseudo_regret = np.cumsum(gaps[self.path[:, -1]])

    @property
    def R(self) -> int:
        return self.path.shape[1] - 1

    @property
    def arm_counts(self) -> np.ndarray:
        return self.pair_counts[-1].sum(axis=0)

    @property
    def layer_counts(self) -> list[np.ndarray]:
        """Selection counts of the experts of layers 1..R (list index k - 1)."""
        return [self.pair_counts[d].sum(axis=0) for d in range(self.R)]

    @property
    def invocations(self) -> list[np.ndarray]:
        """How often each selector of every decision layer acted."""
        return [m.sum(axis=1) for m in self.pair_counts]

    @property
    def final_regret(self) -> float:
        return float(self.cumulative_pseudo_regret[-1]) if self.n else 0.0


@dataclass
class EngineState:
    """Mutable state of a hierarchy mid-run.

    ``states[d][j]`` is what selector j of decision layer d reads and updates.
    In shared mode every entry of ``states[d]`` is the same object.
    """

    states: list[list[PolicyState]]
    pair_counts: list[np.ndarray]

    def calls(self, d: int, j: int) -> int:
        return int(self.pair_counts[d][j].sum())


def new_engine_state(spec: HierarchySpec, n_arms: int) -> EngineState:
    states, pairs = [], []
    for d in range(spec.R + 1):
        n_sel = len(spec.selectors(d))
        n_child = spec.num_children(d, n_arms)
        if spec.shared:
            st = new_state(n_child)
            states.append([st] * n_sel)
        else:
            states.append([new_state(n_child) for _ in range(n_sel)])
        pairs.append(np.zeros((n_sel, n_child), dtype=np.int64))
    return EngineState(states, pairs)


def _descend(spec: HierarchySpec, es: EngineState, t: int, draws) -> list[int]:
    path, j = [], 0
    for d in range(spec.R + 1):
        clock_t = es.calls(d, j) + 1 if spec.clock is Clock.LOCAL else t
        c = select(spec.selectors(d)[j], es.states[d][j], clock_t, draws(d))
        path.append(c)
        j = c
    return path


def _credit(es: EngineState, path: list[int], reward: float) -> None:
    j = 0
    for d, c in enumerate(path):
        update(es.states[d][j], c, reward)
        es.pair_counts[d][j, c] += 1
        j = c


def step(spec: HierarchySpec, es: EngineState, arms: ArmSet, t: int, rng: np.random.Generator):
    """Play round t: descend from the top to an arm, then credit its reward to
    every decision point on the path. Returns (path, reward)."""
    path = _descend(spec, es, t, lambda d: rng)
    reward = sample(arms.arms[path[-1]], rng)
    _credit(es, path, reward)
    return tuple(path), reward


class _SlotDraws:
    """Feeds the two pre-drawn uniforms of one (round, layer) slot to select()."""

    __slots__ = ("_values", "_i")

    def __init__(self, values):
        self._values = values
        self._i = 0

    def random(self):
        v = self._values[self._i]
        self._i += 1
        return float(v)


def _encode(spec: HierarchySpec, n_arms: int):
    n_dec = spec.R + 1
    max_sel = max(len(spec.selectors(d)) for d in range(n_dec))
    kinds = np.zeros((n_dec, max_sel), dtype=np.int64)
    params = np.zeros((n_dec, max_sel), dtype=np.float64)
    for d in range(n_dec):
        for j, p in enumerate(spec.selectors(d)):
            kinds[d, j] = KIND_CODES[p.kind]
            params[d, j] = p.param
    n_child = np.array([spec.num_children(d, n_arms) for d in range(n_dec)], dtype=np.int64)
    return kinds, params, n_child


def _uses_randomized_policy(spec: HierarchySpec) -> bool:
    return any(
        p.kind is PolicyKind.EPSILON_GREEDY for d in range(spec.R + 1) for p in spec.selectors(d)
    )


def _run_python(spec, arms, n, table, uniforms):
    es = new_engine_state(spec, arms.K)
    pulls = np.zeros(arms.K, dtype=np.int64)
    path = np.empty((n, spec.R + 1), dtype=np.int64)
    reward = np.empty(n)
    for s in range(n):
        if uniforms.shape[0]:
            draws = lambda d, s=s: _SlotDraws(uniforms[s, d])
        else:
            draws = lambda d: None
        p = _descend(spec, es, s + 1, draws)
        arm = p[-1]
        x = float(table[arm, pulls[arm]])
        pulls[arm] += 1
        _credit(es, p, x)
        path[s] = p
        reward[s] = x
    return path, reward, es.pair_counts


def run(spec: HierarchySpec, arms: ArmSet, n: int, rng, backend: str = "compiled") -> RunTrace:
    """Simulate n rounds.

    Rewards are pre-drawn per arm (the s-th pull of arm i returns the s-th
    draw of arm i), and epsilon-greedy uniforms per (round, layer) slot, so
    ``backend="python"`` and ``backend="compiled"`` give identical traces.
    """
    if n < 1:
        raise ValueError("horizon n must be >= 1")
    spec.validate(arms.K)
    rng = np.random.default_rng(rng)
    table = arms.reward_table(n, rng)
    if _uses_randomized_policy(spec):
        uniforms = rng.random((n, spec.R + 1, 2))
    else:
        uniforms = np.empty((0, spec.R + 1, 2))
    if backend == "python":
        path, reward, pair = _run_python(spec, arms, n, table, uniforms)
    elif backend == "compiled":
        kinds, params, n_child = _encode(spec, arms.K)
        path, reward, pair3 = _kernel.simulate(
            kinds, params, n_child, spec.shared, spec.clock is Clock.LOCAL, table, uniforms, n
        )
        pair = [
            pair3[d, : len(spec.selectors(d)), : n_child[d]].copy() for d in range(spec.R + 1)
        ]
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return RunTrace(n=n, path=path, reward=reward, pair_counts=pair, arm_means=arms.means.copy())


def pseudo_regret(trace: RunTrace, arms: ArmSet) -> np.ndarray:
    """Cumulative sum of mu_1 - mu_{I_s} over rounds."""
    return np.cumsum(arms.gaps[trace.path[:, -1]])


def realized_regret(trace: RunTrace, arms: ArmSet) -> np.ndarray:
    """max_i sum_s X_{i,s} - sum_s X(s) for deterministic arms, where the
    best arm's counterfactual reward stream is t * mu_1."""
    if not arms.is_deterministic:
        raise ValueError("realized regret is only reported for deterministic arms")
    t = np.arange(1, trace.n + 1)
    return t * arms.means[0] - np.cumsum(trace.reward)


def selection_matrix(trace: RunTrace, k: int) -> np.ndarray:
    """Selector-by-child counts of decision layer k (0 = top strategy)."""
    if not 0 <= k <= trace.R:
        raise IndexError(f"layer {k} out of range 0..{trace.R}")
    return trace.pair_counts[k]


def check_top_deviation(trace: RunTrace, alpha: float, delta_K: float, n: int | None = None):
    """Test C(t, n) <= 2 alpha (ln n - ln t) / delta_K^2 for all 1 <= t <= n,
    where C(t, n) counts rounds in [t, n] whose top choice was not expert 0.

    Returns ``(holds, first_violating_t)`` with t 1-based, or None.
    """
    if trace.R < 1:
        raise ValueError("the top-deviation condition needs at least one expert layer")
    n = trace.n if n is None else n
    off = (trace.path[:n, 0] != 0).astype(np.int64)
    suffix = np.cumsum(off[::-1])[::-1]
    t = np.arange(1, n + 1)
    bound = 2.0 * alpha * (math.log(n) - np.log(t)) / delta_K**2
    bad = np.flatnonzero(suffix > bound + 1e-12 * np.maximum(1.0, np.abs(bound)))
    if bad.size:
        return False, int(bad[0]) + 1
    return True, None
