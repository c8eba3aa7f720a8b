"""Experiment harness: parameter inflation, selection ranges, expert count,
plus empirical probes of the reasonable/stable expert properties."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.stats import spearmanr

from .arms import ArmKind, ArmSet, example_arm_set, generate_arm_set
from .bounds import RegimeWarning, good_expert_bound, kl, ucb_regret_bound
from .engine import HierarchySpec, RunTrace, example_hierarchy, run, ucb_hierarchy
from .policies import PolicySpec
from .seeding import stream

# stream key namespaces
_GEN, _RUN, _SOLO, _ARMS = 1, 2, 3, 4


class ExperimentKind(str, Enum):
    PARAM_INFLATION = "ParamInflation"
    SELECTION_RANGES = "SelectionRanges"
    EXPERT_COUNT = "ExpertCount"


class Scale(str, Enum):
    DESK = "desk"
    PAPER = "paper"


_PRESETS = {
    (ExperimentKind.PARAM_INFLATION, Scale.DESK): dict(processes=100, repeats=20, horizon=10_000),
    (ExperimentKind.PARAM_INFLATION, Scale.PAPER): dict(processes=1000, repeats=100, horizon=10_000),
    (ExperimentKind.SELECTION_RANGES, Scale.DESK): dict(processes=1, repeats=1, horizon=10_000),
    (ExperimentKind.SELECTION_RANGES, Scale.PAPER): dict(processes=1, repeats=1, horizon=10_000),
    (ExperimentKind.EXPERT_COUNT, Scale.DESK): dict(processes=1, repeats=20, horizon=5_000, max_experts=30),
    (ExperimentKind.EXPERT_COUNT, Scale.PAPER): dict(processes=1, repeats=100, horizon=10_000, max_experts=100),
}


@dataclass
class ExperimentConfig:
    """Settings for one experiment.

    ``repeats`` is the number of runs averaged per regret estimate
    (ParamInflation) or the number of random hierarchies per expert count
    (ExpertCount). ``arms``/``hierarchy`` pin a fixed instance where the
    experiment uses one; when None a default or random instance is used.
    """

    kind: ExperimentKind
    processes: int = 1
    repeats: int = 1
    horizon: int = 10_000
    distribution: ArmKind = ArmKind.BERNOULLI
    inflation_value: float = 1_000_000.0
    seed: int = 0
    n_arms: int = 100
    max_experts: int = 30
    compare_experts: int = 3
    arms: ArmSet | None = None
    hierarchy: HierarchySpec | None = None
    workers: int = 1

    def __post_init__(self):
        self.kind = ExperimentKind(self.kind)
        self.distribution = ArmKind(self.distribution)
        for name in ("processes", "repeats", "horizon", "max_experts", "workers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.n_arms < 2:
            raise ValueError("n_arms must be >= 2")

    @classmethod
    def preset(cls, kind, scale="desk", **overrides) -> "ExperimentConfig":
        kind = ExperimentKind(kind)
        base = dict(_PRESETS[kind, Scale(scale)])
        if kind is not ExperimentKind.PARAM_INFLATION:
            base["distribution"] = ArmKind.DETERMINISTIC
        base.update(overrides)
        return cls(kind=kind, **base)

    def to_dict(self) -> dict:
        doc = {
            "kind": self.kind.value,
            "processes": self.processes,
            "repeats": self.repeats,
            "horizon": self.horizon,
            "distribution": self.distribution.value,
            "inflation_value": self.inflation_value,
            "seed": self.seed,
            "n_arms": self.n_arms,
            "max_experts": self.max_experts,
            "compare_experts": self.compare_experts,
        }
        if self.arms is not None:
            doc["arms"] = self.arms.to_dict()
        if self.hierarchy is not None:
            doc["hierarchy"] = self.hierarchy.to_dict()
        return doc


@dataclass
class ExperimentResult:
    """Per-process records, aggregate summary, tables and regret curves.

    ``tables`` maps a file stem to (header, rows); ``curves`` maps a file stem
    to named equal-length curves sharing an x axis given by ``curve_x``.
    """

    config: ExperimentConfig
    records: list[dict]
    summary: dict
    tables: dict[str, tuple[list[str], list[list]]] = field(default_factory=dict)
    curves: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    curve_x: dict[str, tuple[str, np.ndarray]] = field(default_factory=dict)
    trace: RunTrace | None = None


# -- random structures -------------------------------------------------------


def generate_hierarchy(rng: np.random.Generator, R: int | None = None, L=None, sort: bool = False) -> HierarchySpec:
    """All-UCB structure: R uniform on {1..9}, beta ~ U(2,10), L_k uniform on
    {2..10}, every expert parameter ~ U(2,10)."""
    if R is None:
        R = int(rng.integers(1, 9, endpoint=True))
    beta = rng.uniform(2.0, 10.0)
    if L is None:
        L = rng.integers(2, 10, endpoint=True, size=R)
    alphas = [rng.uniform(2.0, 10.0, size=int(l)) for l in L]
    if sort:
        alphas = [np.sort(a) for a in alphas]
    return ucb_hierarchy(beta, alphas)


def inflate(spec: HierarchySpec, value: float) -> HierarchySpec:
    """Replace every non-minimal UCB parameter of each layer with `value`."""
    layers = []
    for layer in spec.layers:
        lowest = min(p.alpha for p in layer)
        layers.append(tuple(p if p.alpha == lowest else PolicySpec.ucb(value) for p in layer))
    return spec.with_layers(layers)


def _hierarchy_summary(spec: HierarchySpec) -> dict:
    return {
        "R": spec.R,
        "L": list(spec.layer_sizes),
        "beta": spec.top.alpha,
        "alphas": [[p.alpha for p in layer] for layer in spec.layers],
    }


def _map(fn, items, workers):
    if workers <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- parameter inflation -----------------------------------------------------


def _mean_curve(spec, arms, cfg, process, reps):
    acc = np.zeros(cfg.horizon)
    for r in range(reps):
        acc += run(spec, arms, cfg.horizon, stream(cfg.seed, _RUN, process, r)).cumulative_pseudo_regret
    return np.concatenate([[0.0], acc / reps])


def _inflation_process(args):
    cfg, p = args
    gen = stream(cfg.seed, _GEN, p)
    arms = generate_arm_set(cfg.distribution, gen)
    spec = generate_hierarchy(gen)
    reps = 1 if cfg.distribution is ArmKind.DETERMINISTIC else cfg.repeats
    # both halves replay the same reward streams
    c1 = _mean_curve(spec, arms, cfg, p, reps)
    c2 = _mean_curve(inflate(spec, cfg.inflation_value), arms, cfg, p, reps)
    record = {
        "process": p,
        "seed": cfg.seed,
        "K": arms.K,
        "arms": arms.to_dict(),
        **_hierarchy_summary(spec),
        "repeats": reps,
        "R1": float(c1[-1]),
        "R2": float(c2[-1]),
        "R2_lt_R1": bool(c2[-1] < c1[-1]),
    }
    return record, c1, c2


def run_param_inflation(config: ExperimentConfig) -> ExperimentResult:
    """Random arm set and all-UCB hierarchy per process; R1 is the mean final
    pseudo-regret as generated, R2 after inflating every non-minimal parameter
    of each layer. Equality counts as R2 >= R1."""
    if config.kind is not ExperimentKind.PARAM_INFLATION:
        raise ValueError("config.kind must be ParamInflation")
    outs = _map(_inflation_process, [(config, p) for p in range(config.processes)], config.workers)
    records = [o[0] for o in outs]
    below = sum(r["R2_lt_R1"] for r in records)
    total = len(records)
    summary = {
        "experiment": config.kind.value,
        "distribution": config.distribution.value,
        "processes": total,
        "times_R2_ge_R1": total - below,
        "times_R2_lt_R1": below,
        "proportion_R2_lt_R1": below / total,
    }
    table = (
        ["distribution", "times_R2_ge_R1", "times_R2_lt_R1", "proportion_R2_lt_R1"],
        [[config.distribution.value, total - below, below, below / total]],
    )
    rounds = np.arange(config.horizon + 1)
    curves, xs = {}, {}
    for rec, c1, c2 in outs:
        stem = f"regret_process_{rec['process']:04d}"
        curves[stem] = {"R1": c1, "R2": c2}
        xs[stem] = ("round", rounds)
    return ExperimentResult(config, records, summary, {"table_r1_r2": table}, curves, xs)


# -- selection ranges --------------------------------------------------------


def band_masses(matrix: np.ndarray) -> tuple[int, int, int]:
    """Split a selector-by-child count matrix into (below, on, above) its
    diagonal band.

    Row j is centred on column j (C - 1) / (L - 1); the band half-width is
    max(1, (C - 1) / (L - 1)). "Above" means columns to the right of the band.
    """
    m = np.asarray(matrix)
    L, C = m.shape
    slope = (C - 1) / (L - 1) if L > 1 else 0.0
    half = max(1.0, slope)
    cols = np.arange(C)
    below = on = above = 0
    for j in range(L):
        centre = j * slope
        dist = cols - centre
        on += int(m[j, np.abs(dist) <= half + 1e-9].sum())
        above += int(m[j, dist > half + 1e-9].sum())
        below += int(m[j, dist < -half - 1e-9].sum())
    return below, on, above


def run_selection_ranges(config: ExperimentConfig) -> ExperimentResult:
    """Run one hierarchy and record every layer's selector-by-child matrix,
    then rerun the first bottom experts standalone with the budget they got
    inside the hierarchy and compare their arm counts."""
    if config.kind is not ExperimentKind.SELECTION_RANGES:
        raise ValueError("config.kind must be SelectionRanges")
    if config.hierarchy is None and config.arms is None:
        arms, spec = example_arm_set(), example_hierarchy()
    else:
        gen = stream(config.seed, _GEN, 0)
        arms = config.arms or generate_arm_set(config.distribution, gen)
        spec = config.hierarchy or generate_hierarchy(gen, sort=True)
    n = config.horizon
    trace = run(spec, arms, n, stream(config.seed, _RUN, 0))

    tables = {}
    for d, m in enumerate(trace.pair_counts):
        rows_lbl = ["B"] if d == 0 else [f"a{j + 1}^{d}" for j in range(m.shape[0])]
        if d == spec.R:
            cols_lbl = [f"arm{c + 1}" for c in range(m.shape[1])]
        else:
            cols_lbl = [f"a{c + 1}^{d + 1}" for c in range(m.shape[1])]
        tables[f"selection_layer_{d}"] = (["selector", *cols_lbl], [[r, *map(int, row)] for r, row in zip(rows_lbl, m)])

    bottom = trace.pair_counts[-1]
    budgets = bottom.sum(axis=1)
    comparison = []
    records = []
    R = spec.R
    for j in range(min(config.compare_experts, bottom.shape[0])):
        budget = int(budgets[j])
        policy = spec.selectors(R)[j]
        if budget > 0:
            solo = run(HierarchySpec(policy), arms, budget, stream(config.seed, _SOLO, j)).arm_counts
        else:
            solo = np.zeros(arms.K, dtype=np.int64)
        comparison.append([f"a{j + 1}^{R}", *map(int, bottom[j])])
        comparison.append([f"b{j + 1}^{R}", *map(int, solo)])
        share_in = bottom[j, 0] / budget if budget else float("nan")
        share_solo = solo[0] / budget if budget else float("nan")
        records.append(
            {
                "expert": j,
                "budget": budget,
                "hierarchy_counts": bottom[j].tolist(),
                "standalone_counts": solo.tolist(),
                "best_arm_share_in_hierarchy": float(share_in),
                "best_arm_share_standalone": float(share_solo),
            }
        )
    tables["standalone_comparison"] = (["expert", *[f"arm{c + 1}" for c in range(arms.K)]], comparison)

    below, on, above = band_masses(bottom)
    summary = {
        "experiment": config.kind.value,
        "horizon": n,
        "final_regret": trace.final_regret,
        "bottom_band_mass": {"below": below, "on": on, "above": above},
        "best_expert_share_gain": (
            records[0]["best_arm_share_in_hierarchy"] - records[0]["best_arm_share_standalone"]
            if records
            else None
        ),
    }
    curves = {"regret": {"pseudo_regret": np.concatenate([[0.0], trace.cumulative_pseudo_regret])}}
    xs = {"regret": ("round", np.arange(n + 1))}
    return ExperimentResult(config, records, summary, tables, curves, xs, trace)


# -- number of experts -------------------------------------------------------


def expected_min_alpha(i: int) -> float:
    """E[min of i iid U(2,10)] = 8 / (i + 1) + 2."""
    return 8.0 / (i + 1) + 2.0


def bound_curve(arms: ArmSet, max_experts: int, horizon: int) -> np.ndarray:
    """M_i for i = 1..max_experts: the good-expert bound at beta = 6 and the
    expected minimal expert parameter. i = 1 falls back to the standalone UCB
    bound at alpha = 6."""
    out = []
    log_n = math.log(horizon)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        for i in range(1, max_experts + 1):
            if i == 1:
                out.append(ucb_regret_bound(arms, 6.0).coefficient * log_n)
            else:
                rep = good_expert_bound(6.0, [expected_min_alpha(i)], [i], arms)
                out.append(rep.coefficient * log_n)
    return np.array(out)


def _expert_count_cell(args):
    cfg, arms, i = args
    regs = []
    for h in range(cfg.repeats):
        g = stream(cfg.seed, _GEN, i, h)
        spec = generate_hierarchy(g, R=1, L=[i])
        regs.append(run(spec, arms, cfg.horizon, stream(cfg.seed, _RUN, i, h)).final_regret)
    return regs


def run_expert_count(config: ExperimentConfig) -> ExperimentResult:
    """For L_1 = 1..max_experts compare the bound curve M_i with the simulated
    mean regret N_i of random one-layer hierarchies on a fixed deterministic
    arm set. P1 and P2 are their argmins (ties -> smallest i)."""
    if config.kind is not ExperimentKind.EXPERT_COUNT:
        raise ValueError("config.kind must be ExpertCount")
    arms = config.arms or generate_arm_set(
        ArmKind.DETERMINISTIC, stream(config.seed, _ARMS), k_override=config.n_arms
    )
    if not arms.is_deterministic:
        raise ValueError("the expert-count experiment uses deterministic arms")
    i_values = np.arange(1, config.max_experts + 1)
    M = bound_curve(arms, config.max_experts, config.horizon)
    cells = _map(_expert_count_cell, [(config, arms, int(i)) for i in i_values], config.workers)
    N = np.array([np.mean(c) for c in cells])
    P1 = int(i_values[np.argmin(M)])
    P2 = int(i_values[np.argmin(N)])
    rho = float(spearmanr(M, N).statistic) if len(i_values) > 2 else float("nan")
    records = [
        {"i": int(i), "M_i": float(m), "N_i": float(nv), "regrets": [float(x) for x in c]}
        for i, m, nv, c in zip(i_values, M, N, cells)
    ]
    summary = {
        "experiment": config.kind.value,
        "K": arms.K,
        "P1": P1,
        "P2": P2,
        "difference": abs(P1 - P2),
        "spearman_M_N": rho,
        "note": "M_1 uses the standalone UCB bound at alpha = 6 (one expert is outside the good-expert regime)",
    }
    tables = {
        "table_p1_p2": (["K", "P1", "P2", "difference"], [[arms.K, P1, P2, abs(P1 - P2)]]),
        "m_n_curve": (["i", "M_i", "N_i"], [[int(i), float(m), float(nv)] for i, m, nv in zip(i_values, M, N)]),
    }
    curves = {"m_n": {"M_i": M, "N_i": N}}
    xs = {"m_n": ("i", i_values)}
    return ExperimentResult(config, records, summary, tables, curves, xs)


RUNNERS = {
    ExperimentKind.PARAM_INFLATION: run_param_inflation,
    ExperimentKind.SELECTION_RANGES: run_selection_ranges,
    ExperimentKind.EXPERT_COUNT: run_expert_count,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[config.kind](config)


# -- probes ------------------------------------------------------------------


@dataclass
class ProbeReport:
    grid: np.ndarray
    mean_pulls: np.ndarray
    reference: np.ndarray
    gap: np.ndarray
    stderr: np.ndarray
    constant: float
    passed: bool


def _prefix_pulls(policy, arms, n, repeats, child, seed):
    grid = np.unique(np.geomspace(max(10, arms.K), n, num=8).astype(int))
    pulls = np.empty((repeats, grid.size))
    for r in range(repeats):
        trace = run(HierarchySpec(policy), arms, n, stream(seed, _RUN, r))
        hits = np.cumsum(trace.path[:, 0] == child)
        pulls[r] = hits[grid - 1]
    se = pulls.std(axis=0, ddof=1) / math.sqrt(repeats) if repeats > 1 else np.zeros(grid.size)
    return grid, pulls.mean(axis=0), se


def _bounded(gap, se) -> bool:
    """No growth trend: the last value stays within 1 + 3 SE of the first half's max."""
    half = max(1, len(gap) // 2)
    return bool(gap[-1] <= gap[:half].max() + 1.0 + 3.0 * se[-1])


def probe_reasonable(policy: PolicySpec, env: ArmSet, n: int, repeats: int, seed: int = 0) -> ProbeReport:
    """Mean pulls of the unique worst child against the n/k line."""
    if not env.means[-1] < env.means[-2]:
        raise ValueError("probe needs a unique minimal-mean child")
    grid, pulls, se = _prefix_pulls(policy, env, n, repeats, env.K - 1, seed)
    ref = grid / env.K
    excess = pulls - ref
    return ProbeReport(grid, pulls, ref, excess, se, float(excess.max()), _bounded(excess, se))


def probe_stable(policy: PolicySpec, env: ArmSet, n: int, repeats: int, child: int = 1, seed: int = 0) -> ProbeReport:
    """Mean pulls of `child` against (1 / kl(mu_2, mu_1)) ln n, where mu_1 is
    the best mean and mu_2 = min(mean of child, second-best mean)."""
    mu1 = float(env.means[0])
    mu2 = float(min(env.means[child], env.means[1]))
    d = kl(mu2, mu1)
    grid, pulls, se = _prefix_pulls(policy, env, n, repeats, child, seed)
    ref = np.log(grid) / d
    deficit = ref - pulls
    return ProbeReport(grid, pulls, ref, deficit, se, float(deficit.max()), _bounded(deficit, se))
