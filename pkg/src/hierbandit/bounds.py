"""Closed-form regret bounds and pull-count bounds.

Upper bounds are reported as the coefficient of ln n. Constants whose value
is only known to exist are listed in ``BoundReport.unquantified`` rather than
given a number.

Arm ranks ``m``/``i`` and layer numbers ``k`` in this module are 1-based, as in
the usual statement of these formulas; ``gaps`` is a length-K array with
``gaps[0] == 0`` (``ArmSet.gaps``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .arms import ArmSet


class BoundError(ValueError):
    pass


class RegimeWarning(UserWarning):
    """Inputs fall outside the regime in which a bound was established."""


@dataclass
class BoundReport:
    name: str
    coefficient: float
    constant: float | None = None
    n: float | None = None
    intermediates: dict = field(default_factory=dict)
    unquantified: tuple[str, ...] = ()
    warnings: list[str] = field(default_factory=list)

    def value_at(self, n: float) -> float:
        return self.coefficient * math.log(n) + (self.constant or 0.0)

    @property
    def value(self) -> float | None:
        return None if self.n is None else self.value_at(self.n)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "coefficient": self.coefficient,
            "constant": self.constant,
            "n": self.n,
            "value": self.value,
            "intermediates": self.intermediates,
            "unquantified": list(self.unquantified),
            "warnings": list(self.warnings),
        }


def _gaps(arms_or_gaps) -> np.ndarray:
    if isinstance(arms_or_gaps, ArmSet):
        return np.asarray(arms_or_gaps.gaps, dtype=float)
    gaps = np.asarray(arms_or_gaps, dtype=float)
    if gaps.ndim != 1 or gaps.size < 2 or gaps[0] != 0 or np.any(gaps[1:] <= 0):
        raise BoundError("gaps must be [0, Delta_2, ..., Delta_K] with every Delta_i > 0")
    return gaps


def _g(x: float) -> float:
    """(1 + x) ln(1 + x) - x, accurate near x = 0."""
    if x == -1.0:
        return 1.0
    if abs(x) < 0.05:
        # sum over k >= 2 of (-x)^k / (k (k - 1))
        return sum((-x) ** k / (k * (k - 1)) for k in range(2, 18))
    return (1.0 + x) * math.log1p(x) - x


def kl(p: float, q: float) -> float:
    """Bernoulli relative entropy kl(p, q), with 0 ln 0 = 0.

    Returns ``math.inf`` when q is 0 or 1 and p differs from q. Evaluated as
    q g(x) + (1 - q) g(y) with p = q (1 + x), 1 - p = (1 - q)(1 + y), which is
    a sum of non-negative terms and stays accurate when p is close to q.
    """
    if not 0.0 <= p <= 1.0 or not 0.0 <= q <= 1.0:
        raise BoundError(f"kl arguments must lie in [0, 1], got ({p}, {q})")
    if p == q:
        return 0.0
    if q in (0.0, 1.0):
        return math.inf
    d = p - q
    return q * _g(d / q) + (1.0 - q) * _g(-d / (1.0 - q))


def ucb_regret_bound(arms, alpha: float, n: float = 1.0) -> BoundReport:
    """Standalone alpha-UCB: sum over i >= 2 of 2 alpha / Delta_i ln n + alpha / (alpha - 2)."""
    if alpha <= 2:
        raise BoundError(f"alpha={alpha}: the constant alpha/(alpha-2) is undefined for alpha <= 2")
    g = _gaps(arms)[1:]
    return BoundReport(
        name="ucb",
        coefficient=float(np.sum(2.0 * alpha / g)),
        constant=len(g) * alpha / (alpha - 2.0),
        n=n,
        intermediates={"alpha": alpha},
    )


def lai_robbins_coefficient(means) -> float:
    """sum over i >= 2 of Delta_i / kl(mu_i, mu_1) for Bernoulli means."""
    mu = np.asarray(means, dtype=float)
    if mu[0] in (0.0, 1.0):
        raise BoundError("best mean must lie strictly inside (0, 1)")
    return float(sum((mu[0] - m) / kl(m, mu[0]) for m in mu[1:]))


def lai_robbins_lower_bound(arms, n: float) -> float:
    """Asymptotic lower bound (sum Delta_i / kl(mu_i, mu_1)) ln n."""
    if n < 2:
        raise BoundError("the lower bound needs n >= 2")
    means = arms.means if isinstance(arms, ArmSet) else arms
    return lai_robbins_coefficient(means) * math.log(n)


def bad_expert_lower_bound(mu1: float, muK: float, R: int, n: float) -> float:
    """(mu_1 - mu_K) / (2 kl(mu_K, mu_1)) * (R ln n - R^2 ln 4).

    Asymptotic, so negative for small n.
    """
    if not 0.0 < muK < mu1 < 1.0:
        raise BoundError("need 0 < mu_K < mu_1 < 1")
    if R < 1:
        raise BoundError("need R >= 1")
    d = kl(muK, mu1)
    if math.isinf(d):
        raise BoundError("kl(mu_K, mu_1) is infinite")
    return (mu1 - muK) / (2.0 * d) * (R * math.log(n) - R * R * math.log(4.0))


def bottom_layer_bound(arms, bottom_alphas, n: float = 1.0) -> BoundReport:
    """Bound driven by the largest bottom-layer UCB parameter alone:
    sum over i >= 2 of 2 alpha* / Delta_i ln n, independent of layers above."""
    if len(bottom_alphas) == 0:
        raise BoundError("need at least one bottom-layer parameter")
    a_star = float(max(bottom_alphas))
    g = _gaps(arms)[1:]
    return BoundReport(
        name="bottom_layer",
        coefficient=float(np.sum(2.0 * a_star / g)),
        n=n,
        intermediates={"alpha_star": a_star},
        unquantified=("C_alpha_star",),
    )


def _pressure(beta, alpha1, L):
    """(L_k - 1) * alpha_1^{k-1} for k = 1..R, with alpha_1^0 = beta."""
    upper = [beta, *alpha1[:-1]]
    return [(L[k] - 1) * upper[k] for k in range(len(L))]


def dominant_layers(beta, alpha1_per_layer, L, gaps, m: int) -> set[int]:
    """Layers k whose pressure (L_k - 1) alpha_1^{k-1} / Delta_m^2 is at least
    every earlier layer's pressure measured against Delta_K^2.

    Layer 1 has no predecessors, so it is always included.
    """
    g = _gaps(gaps)
    K = len(g)
    if not 2 <= m <= K:
        raise BoundError(f"arm rank m={m} outside 2..{K}")
    if len(alpha1_per_layer) != len(L):
        raise BoundError("need one minimal parameter per layer")
    press = _pressure(beta, list(alpha1_per_layer), list(L))
    dm2, dK2 = g[m - 1] ** 2, g[K - 1] ** 2
    out = set()
    for k in range(1, len(L) + 1):
        earlier = max((press[j] / dK2 for j in range(k - 1)), default=0.0)
        if press[k - 1] / dm2 >= earlier:
            out.add(k)
    return out


def _dominant_pressure(beta, alpha1, L, gaps, m) -> float:
    press = _pressure(beta, list(alpha1), list(L))
    return float(sum(press[k - 1] for k in dominant_layers(beta, alpha1, L, gaps, m)))


_TIE_RTOL = 1e-12


def threshold_arm(beta, alpha1_per_layer, L, gaps) -> int:
    """Smallest arm rank i in 2..K with

        (K - i) a / Delta_i^2 - sum_{l > i} a / Delta_l^2
            <= sum_{k in S_i} (L_k - 1) alpha_1^{k-1} / Delta_i^2

    where a is the bottom layer's minimal parameter. Always exists: at i = K
    the left side is 0.
    """
    g = _gaps(gaps)
    K = len(g)
    a = alpha1_per_layer[-1] if len(alpha1_per_layer) else beta
    inv2 = a / g[1:] ** 2  # index i - 2 for rank i
    for i in range(2, K + 1):
        head, tail = (K - i) * inv2[i - 2], math.fsum(inv2[i - 1 :])
        lhs = head - tail
        rhs = _dominant_pressure(beta, alpha1_per_layer, L, g, i) / g[i - 1] ** 2
        # exact ties (e.g. equal gaps) must not hinge on rounding
        if lhs <= rhs + _TIE_RTOL * max(head, tail, rhs):
            return i
    return K


def good_expert_bound(beta, alpha1_per_layer, L, arms, n: float = 1.0, epsilon: float = 0.0) -> BoundReport:
    """ln n coefficient when only the minimal-parameter expert of each layer is good.

    With i* = threshold_arm(...) and a the bottom layer's minimal parameter:

    - i* > 2: a / (2 Delta_{i*-1}^2) * sum_{l >= i*} Delta_l
      + sum_{i=2}^{i*-1} a / (2 Delta_i) + epsilon
    - otherwise: (sum_{k in S_2} (L_k - 1) alpha_1^{k-1}) * Delta_K / (2 Delta_2^2)
      + sum_{i=2}^{K} a / (2 Delta_i) + epsilon

    Outside 1 < L_1 < ... < L_R < K the formula is still evaluated, with a warning.
    """
    g = _gaps(arms)
    K = len(g)
    L = [int(x) for x in L]
    alpha1 = [float(x) for x in alpha1_per_layer]
    if not L or len(alpha1) != len(L):
        raise BoundError("need R >= 1 layers with one minimal parameter each")
    notes = []
    chain = [1, *L, K]
    if any(x >= y for x, y in zip(chain, chain[1:])):
        notes.append(f"layer sizes {L} with K={K} violate 1 < L_1 < ... < L_R < K")
        warnings.warn(notes[-1], RegimeWarning, stacklevel=2)
    a = alpha1[-1]
    i_star = threshold_arm(beta, alpha1, L, g)
    s2 = sorted(dominant_layers(beta, alpha1, L, g, 2))
    if i_star > 2:
        coef = (
            a / (2.0 * g[i_star - 2] ** 2) * g[i_star - 1 :].sum()
            + sum(a / (2.0 * g[i - 1]) for i in range(2, i_star))
            + epsilon
        )
    else:
        press = _pressure(beta, alpha1, L)
        top = sum(press[k - 1] for k in s2)
        coef = top * g[K - 1] / (2.0 * g[1] ** 2) + float(np.sum(a / (2.0 * g[1:]))) + epsilon
    return BoundReport(
        name="good_expert",
        coefficient=float(coef),
        n=n,
        intermediates={"i_star": i_star, "S_2": s2, "alpha_bottom_min": a, "epsilon": epsilon},
        unquantified=("C_eps_delta", "M_eps"),
        warnings=notes,
    )


@dataclass
class PullBounds:
    upper: np.ndarray
    lower: np.ndarray
    lower_is_asymptotic: bool = True


def pull_count_bounds(alpha: float, gaps, n: float, epsilon: float) -> PullBounds:
    """Pull counts of suboptimal deterministic arms under alpha-UCB.

    ``gaps`` holds Delta_i for the suboptimal arms only. The upper bound
    alpha / (2 Delta^2) ln n + 1 holds for every n; the lower bound
    alpha / (2 (Delta + eps)^2) ln n only for large n.
    """
    if epsilon <= 0:
        raise BoundError("epsilon must be > 0")
    g = np.asarray(gaps, dtype=float)
    ln = math.log(n)
    return PullBounds(
        upper=alpha / (2.0 * g**2) * ln + 1.0,
        lower=alpha / (2.0 * (g + epsilon) ** 2) * ln,
    )
