"""K-revision multistage stochastic programming.

Scenario trees, revisability checking, exact hypercube solvers, MIP
formulations over a shared strategic block, base problems, embedded and
external solving, and a desk-scale experiment harness.
"""

from .tree import (
    ScenarioTree,
    Scenario,
    generate_btree,
    generate_stree,
    join,
    load_tree,
    save_tree,
    split_multidim,
    validate,
)
from .revision import (
    ElbeSubtree,
    PlanPolicy,
    extend_policy_to_plan,
    is_compatible,
    is_k_revisable,
    is_k_revisable_bruteforce,
    max_inconsistency,
    min_revisability,
    revision_policy_of,
    separate_binary_fast,
)
from .hypercube import (
    HypercubeInstance,
    dicut_instance,
    lift_instance,
    pad_instance,
    solve_bruteforce,
    solve_dp,
    split_instance,
)
from .formulations import (
    RevisionFormulationSpec,
    build,
    cut_loop_st,
    facet_inequality_of,
    partially_adaptive,
    subtree_constraint_of,
)
from .model import ModelIR, evaluate, parse_mps, write_lp, write_mps
from .problems import (
    CapacityPlanningInstance,
    Flight,
    LotSizingInstance,
    SaghpInstance,
    attach_revision,
    build_capacity_planning,
    build_lot_sizing,
    build_saghp,
    generate_capacity_planning,
    generate_lot_sizing,
    saghp_weather_tree,
)
from .solver import SolveResult, default_solver, external_solve, solve_lp, solve_mip
from .experiments import ExperimentSpec, conjecture_sweep, run_experiment

__version__ = "0.1.0"
