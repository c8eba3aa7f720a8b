"""Hierarchical experts bandits: simulation engine and regret-bound calculators."""

from .arms import ArmKind, ArmSet, ArmSpec, generate_arm_set, mean, sample
from .bounds import (
    BoundReport,
    bad_expert_lower_bound,
    bottom_layer_bound,
    dominant_layers,
    good_expert_bound,
    kl,
    lai_robbins_lower_bound,
    pull_count_bounds,
    threshold_arm,
    ucb_regret_bound,
)
from .engine import (
    HierarchySpec,
    RunTrace,
    bad_expert_hierarchy,
    check_top_deviation,
    pseudo_regret,
    realized_regret,
    run,
    selection_matrix,
    step,
    ucb_hierarchy,
)
from .experiments import (
    ExperimentConfig,
    ExperimentResult,
    probe_reasonable,
    probe_stable,
    run_expert_count,
    run_param_inflation,
    run_selection_ranges,
)
from .policies import PolicyKind, PolicySpec, PolicyState, new_state, select, update

__version__ = "0.1.0"
