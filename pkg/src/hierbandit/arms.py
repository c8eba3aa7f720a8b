"""Reward distributions on [0, 1] and random arm-set generation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np


class ArmKind(str, Enum):
    DETERMINISTIC = "Deterministic"
    BERNOULLI = "Bernoulli"
    BETA = "Beta"
    BINOMIAL = "BinomialNormalized"


class ArmError(ValueError):
    """Raised for an arm or arm set that violates its invariants."""


@dataclass(frozen=True)
class ArmSpec:
    kind: ArmKind
    p: float | None = None
    a: float | None = None
    b: float | None = None
    trials: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", ArmKind(self.kind))
        if self.kind is ArmKind.BETA:
            if self.a is None or self.b is None or self.a <= 0 or self.b <= 0:
                raise ArmError("Beta arm needs positive shapes a and b")
            if self.p is not None or self.trials is not None:
                raise ArmError("Beta arm takes only a and b")
            return
        if self.p is None or not 0.0 <= self.p <= 1.0:
            raise ArmError(f"{self.kind.value} arm needs p in [0, 1], got {self.p!r}")
        if self.a is not None or self.b is not None:
            raise ArmError(f"{self.kind.value} arm does not take Beta shapes")
        if self.kind is ArmKind.BINOMIAL:
            if self.trials is None or int(self.trials) != self.trials or self.trials < 1:
                raise ArmError("BinomialNormalized arm needs a positive integer trials")
            object.__setattr__(self, "trials", int(self.trials))
        elif self.trials is not None:
            raise ArmError(f"{self.kind.value} arm does not take trials")

    @classmethod
    def deterministic(cls, p):
        return cls(ArmKind.DETERMINISTIC, p=float(p))

    @classmethod
    def bernoulli(cls, p):
        return cls(ArmKind.BERNOULLI, p=float(p))

    @classmethod
    def beta(cls, a, b):
        return cls(ArmKind.BETA, a=float(a), b=float(b))

    @classmethod
    def binomial(cls, p, trials):
        return cls(ArmKind.BINOMIAL, p=float(p), trials=int(trials))

    @property
    def mean(self) -> float:
        return mean(self)

    def to_dict(self) -> dict:
        if self.kind is ArmKind.BETA:
            return {"a": self.a, "b": self.b}
        if self.kind is ArmKind.BINOMIAL:
            return {"p": self.p, "trials": self.trials}
        return {"p": self.p}


def mean(arm: ArmSpec) -> float:
    """Exact mean of the reward distribution."""
    if arm.kind is ArmKind.BETA:
        return arm.a / (arm.a + arm.b)
    return arm.p


def sample(arm: ArmSpec, rng: np.random.Generator) -> float:
    """Draw one reward from `arm`."""
    if arm.kind is ArmKind.DETERMINISTIC:
        return arm.p
    if arm.kind is ArmKind.BERNOULLI:
        return float(rng.random() < arm.p)
    if arm.kind is ArmKind.BETA:
        return float(rng.beta(arm.a, arm.b))
    return rng.binomial(arm.trials, arm.p) / arm.trials


def sample_many(arm: ArmSpec, size: int, rng: np.random.Generator) -> np.ndarray:
    if arm.kind is ArmKind.DETERMINISTIC:
        return np.full(size, arm.p)
    if arm.kind is ArmKind.BERNOULLI:
        return (rng.random(size) < arm.p).astype(np.float64)
    if arm.kind is ArmKind.BETA:
        return rng.beta(arm.a, arm.b, size=size)
    return rng.binomial(arm.trials, arm.p, size=size) / arm.trials


@dataclass(frozen=True)
class ArmSet:
    """K >= 2 arms sorted by mean, best first, with a strict first gap.

    ``gaps[i]`` is ``means[0] - means[i]``, so ``gaps[0] == 0``.
    """

    arms: tuple[ArmSpec, ...]

    def __post_init__(self):
        arms = tuple(self.arms)
        object.__setattr__(self, "arms", arms)
        if len(arms) < 2:
            raise ArmError(f"an arm set needs K >= 2 arms, got {len(arms)}")
        mu = np.array([mean(a) for a in arms])
        if np.any(np.diff(mu) > 0):
            raise ArmError("arms must be sorted by mean, best first")
        if not mu[0] > mu[1]:
            raise ArmError("the best arm must be strictly better than the second (mu_1 > mu_2)")
        mu.setflags(write=False)
        gaps = mu[0] - mu
        gaps.setflags(write=False)
        object.__setattr__(self, "_means", mu)
        object.__setattr__(self, "_gaps", gaps)

    @classmethod
    def from_means(cls, means, kind=ArmKind.DETERMINISTIC):
        kind = ArmKind(kind)
        if kind is ArmKind.DETERMINISTIC:
            return cls(tuple(ArmSpec.deterministic(m) for m in means))
        if kind is ArmKind.BERNOULLI:
            return cls(tuple(ArmSpec.bernoulli(m) for m in means))
        raise ArmError(f"from_means supports Deterministic and Bernoulli, not {kind.value}")

    @property
    def K(self) -> int:
        return len(self.arms)

    @property
    def means(self) -> np.ndarray:
        return self._means

    @property
    def gaps(self) -> np.ndarray:
        return self._gaps

    @property
    def kind(self) -> ArmKind:
        kinds = {a.kind for a in self.arms}
        if len(kinds) != 1:
            raise ArmError("arm set mixes distribution kinds")
        return kinds.pop()

    @property
    def is_deterministic(self) -> bool:
        return all(a.kind is ArmKind.DETERMINISTIC for a in self.arms)

    def reward_table(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Pre-drawn rewards: row i holds the first n draws of arm i."""
        table = np.empty((self.K, n))
        for i, arm in enumerate(self.arms):
            table[i] = sample_many(arm, n, rng)
        return table

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "arms": [a.to_dict() for a in self.arms]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "ArmSet":
        kind = ArmKind(doc["kind"])
        return cls(tuple(ArmSpec(kind, **entry) for entry in doc["arms"]))

    @classmethod
    def from_json(cls, text: str) -> "ArmSet":
        return cls.from_dict(json.loads(text))


def _draw_arm(kind: ArmKind, rng: np.random.Generator) -> ArmSpec:
    p = rng.uniform(0.0, 1.0)
    if kind is ArmKind.DETERMINISTIC:
        return ArmSpec.deterministic(p)
    if kind is ArmKind.BERNOULLI:
        return ArmSpec.bernoulli(p)
    if kind is ArmKind.BETA:
        return ArmSpec.beta(rng.uniform(2.0, 100.0), rng.uniform(2.0, 100.0))
    return ArmSpec.binomial(p, rng.integers(2, 30, endpoint=True))


def generate_arm_set(kind, rng: np.random.Generator, k_override: int | None = None) -> ArmSet:
    """Random arm set: K uniform on {2..30}, p ~ U(0,1), Beta shapes ~ U(2,100),
    binomial trials uniform on {2..30}.

    Any arm tying the best mean is redrawn until the first gap is strict.
    """
    kind = ArmKind(kind)
    if k_override is not None and k_override < 2:
        raise ArmError("k_override must be >= 2")
    K = int(rng.integers(2, 30, endpoint=True)) if k_override is None else int(k_override)
    arms = [_draw_arm(kind, rng) for _ in range(K)]
    while True:
        arms.sort(key=mean, reverse=True)
        tied = [i for i in range(1, K) if mean(arms[i]) == mean(arms[0])]
        if not tied:
            return ArmSet(tuple(arms))
        for i in tied:
            arms[i] = _draw_arm(kind, rng)


# Deterministic arm means of the worked two-layer example (R=2, K=7).
EXAMPLE_MEANS = (0.94, 0.93, 0.54, 0.42, 0.21, 0.20, 0.06)


def example_arm_set() -> ArmSet:
    return ArmSet.from_means(EXAMPLE_MEANS)
