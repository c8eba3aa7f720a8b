"""Decision rules used by the top strategy and by every expert.

Children are indexed from 0. All argmax ties resolve to the lowest index.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class PolicyKind(str, Enum):
    ALPHA_UCB = "AlphaUCB"
    EPSILON_GREEDY = "EpsilonGreedy"
    BAD_FIXED = "BadFixed"
    LEAST_PULLS = "LeastPulls"


# Integer codes shared with the compiled kernel.
KIND_CODES = {
    PolicyKind.ALPHA_UCB: 0,
    PolicyKind.EPSILON_GREEDY: 1,
    PolicyKind.BAD_FIXED: 2,
    PolicyKind.LEAST_PULLS: 3,
}


class PolicyError(ValueError):
    pass


class SmallAlphaWarning(UserWarning):
    """alpha <= 2: simulation is fine but the UCB regret constant is undefined."""


@dataclass(frozen=True)
class PolicySpec:
    kind: PolicyKind
    alpha: float | None = None
    epsilon: float | None = None
    target: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        expected = {
            PolicyKind.ALPHA_UCB: "alpha",
            PolicyKind.EPSILON_GREEDY: "epsilon",
            PolicyKind.BAD_FIXED: "target",
            PolicyKind.LEAST_PULLS: None,
        }[self.kind]
        for name in ("alpha", "epsilon", "target"):
            if name != expected and getattr(self, name) is not None:
                raise PolicyError(f"{self.kind.value} does not take {name}")
        if self.kind is PolicyKind.ALPHA_UCB:
            if self.alpha is None or not self.alpha > 0:
                raise PolicyError(f"AlphaUCB needs alpha > 0, got {self.alpha!r}")
            if self.alpha <= 2:
                warnings.warn(
                    f"alpha={self.alpha} <= 2: regret constant alpha/(alpha-2) is undefined",
                    SmallAlphaWarning,
                    stacklevel=3,
                )
        elif self.kind is PolicyKind.EPSILON_GREEDY:
            if self.epsilon is None or not 0.0 <= self.epsilon <= 1.0:
                raise PolicyError(f"EpsilonGreedy needs epsilon in [0, 1], got {self.epsilon!r}")
        elif self.kind is PolicyKind.BAD_FIXED:
            if self.target is None or int(self.target) != self.target or self.target < 0:
                raise PolicyError(f"BadFixed needs a non-negative integer target, got {self.target!r}")
            object.__setattr__(self, "target", int(self.target))

    @classmethod
    def ucb(cls, alpha):
        return cls(PolicyKind.ALPHA_UCB, alpha=float(alpha))

    @classmethod
    def eps_greedy(cls, epsilon):
        return cls(PolicyKind.EPSILON_GREEDY, epsilon=float(epsilon))

    @classmethod
    def bad(cls, target):
        return cls(PolicyKind.BAD_FIXED, target=int(target))

    @classmethod
    def least_pulls(cls):
        return cls(PolicyKind.LEAST_PULLS)

    @property
    def param(self) -> float:
        """The single numeric parameter, as the kernel stores it."""
        if self.kind is PolicyKind.ALPHA_UCB:
            return self.alpha
        if self.kind is PolicyKind.EPSILON_GREEDY:
            return self.epsilon
        if self.kind is PolicyKind.BAD_FIXED:
            return float(self.target)
        return 0.0

    def to_dict(self) -> dict:
        doc = {"kind": self.kind.value}
        for name in ("alpha", "epsilon", "target"):
            value = getattr(self, name)
            if value is not None:
                doc[name] = value
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "PolicySpec":
        return cls(**doc)


@dataclass
class PolicyState:
    """Selection counts and reward sums over one decision point's children."""

    counts: np.ndarray
    sums: np.ndarray
    invocations: int = 0

    @property
    def num_children(self) -> int:
        return len(self.counts)


def new_state(num_children: int) -> PolicyState:
    if num_children < 1:
        raise PolicyError("a decision point needs at least one child")
    return PolicyState(
        counts=np.zeros(num_children, dtype=np.int64),
        sums=np.zeros(num_children, dtype=np.float64),
    )


def ucb_indices(state: PolicyState, t, alpha: float) -> np.ndarray:
    """Sample mean plus sqrt(alpha ln t / (2 T)) for every visited child."""
    log_t = math.log(t)
    counts = state.counts.astype(np.float64)
    return state.sums / counts + np.sqrt(alpha * log_t / (2.0 * counts))


def select(spec: PolicySpec, state: PolicyState, t, rng=None) -> int:
    """Pick a child index. `t` is the round index driving the UCB bonus.

    `rng` is only consulted by EpsilonGreedy, which draws two uniforms
    (explore?, which child) per call via ``rng.random()``.
    """
    C = state.num_children
    kind = spec.kind
    if kind is PolicyKind.BAD_FIXED:
        if spec.target >= C:
            raise PolicyError(f"BadFixed target {spec.target} out of range for {C} children")
        return spec.target
    if kind is PolicyKind.LEAST_PULLS:
        return int(np.argmin(state.counts))
    if kind is PolicyKind.ALPHA_UCB:
        unvisited = np.flatnonzero(state.counts == 0)
        if unvisited.size:
            return int(unvisited[0])
        return int(np.argmax(ucb_indices(state, t, spec.alpha)))
    # epsilon-greedy; both uniforms are drawn every call to keep streams aligned
    u_explore, u_child = rng.random(), rng.random()
    if u_explore < spec.epsilon:
        return min(int(u_child * C), C - 1)
    means = np.divide(state.sums, state.counts, out=np.zeros(C), where=state.counts > 0)
    return int(np.argmax(means))


def update(state: PolicyState, child: int, reward: float) -> PolicyState:
    if not 0.0 <= reward <= 1.0:
        raise PolicyError(f"reward {reward!r} outside [0, 1]")
    if not 0 <= child < state.num_children:
        raise PolicyError(f"child {child} out of range for {state.num_children} children")
    state.counts[child] += 1
    state.sums[child] += reward
    state.invocations += 1
    return state
