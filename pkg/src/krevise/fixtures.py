"""Named example fixtures used across tests, docs, and the CLI.

The seven-node tree (root rho with children v1, v2; v1 over v3, v4; v2
over v5, v6) carries two reference policies: a 1-revisable one and one
whose minimum revisability is 2.  The fractional complete-plan point on
the same tree is LP-feasible for CP although its x is not 1-revisable.
The tall-tree family realizes the geometric-objective instances whose
subtree LP relaxation is weak.
"""

from __future__ import annotations

import json
from pathlib import Path

from .hypercube import HypercubeInstance, dicut_instance
from .revision import PlanPolicy
from .tree import ScenarioTree, generate_btree, tree_to_dict

SEVEN_NODE_PARENTS = [None, 0, 0, 1, 1, 2, 2]


def seven_node_tree() -> ScenarioTree:
    """rho=0, v1=1, v2=2, v3=3, v4=4, v5=5, v6=6; uniform leaves."""
    return ScenarioTree(SEVEN_NODE_PARENTS)


def revisable_policy():
    """Reference policy that is 1-revisable."""
    return [1, 0, 1, 0, 1, 0, 0]


def revisable_plans() -> PlanPolicy:
    return PlanPolicy.from_lists([[1, 0, 1], [0, 1], [1, 0], [0], [1], [0], [0]])


def stubborn_policy():
    """Reference policy whose minimum revisability is 2."""
    return [1, 0, 1, 0, 1, 0, 1]


def stubborn_plans() -> PlanPolicy:
    """A compatible plan policy needing two revisions on one scenario."""
    return PlanPolicy.from_lists([[1, 0, 1], [0, 1], [1, 1], [0], [1], [0], [1]])


def fractional_cp_point():
    """Fractional (x, pi, r) in the CP polytope whose x needs 2 revisions.

    Keys match the variable names of build_cp on the seven-node tree.
    """
    point = {}
    for v, val in enumerate(stubborn_policy()):
        point[f"x_{v}"] = float(val)
    for v in range(1, 7):
        point[f"r_{v}"] = 0.5
    plans = {0: [1.0, 0.5, 0.5], 1: [0.0, 0.5], 2: [1.0, 0.5], 3: [0.0], 4: [1.0], 5: [0.0], 6: [1.0]}
    tree = seven_node_tree()
    for v, plan in plans.items():
        for k, val in enumerate(plan):
            point[f"pi_{v}_{tree.stage[v] + k}"] = val
    return point


def example_digraph():
    """Three vertices, arcs (1,2), (2,3), (3,2); MAXDICUT = 2."""
    return [1, 2, 3], [(1, 2), (2, 3), (3, 2)]


def dicut_example_instance() -> HypercubeInstance:
    return dicut_instance(*example_digraph())


def tall_tree_instance(height: int) -> HypercubeInstance:
    """Perfect binary tree of the given height (height+1 stages).

    Every sibling pair at depth d is worth (+2^(height-d), -2^(height-d));
    the root is worth 0.  The 1-revision optimum is 2^height - 1 while the
    subtree LP relaxation reaches (2/3) * height * 2^(height-1).
    """
    tree = generate_btree(height + 1)
    c = [0.0] * tree.node_count
    for v in range(1, tree.node_count):
        magnitude = 2.0 ** (height - (tree.stage[v] - 1))
        c[v] = magnitude if v % 2 == 1 else -magnitude
    return HypercubeInstance.from_scalars(tree, c)


def tall_tree_fractional_x(height: int):
    """The 2/3-valued point that is feasible for every height-2 subtree cut."""
    inst = tall_tree_instance(height)
    return [2.0 / 3.0 if cv > 0 else 0.0 for (cv,) in inst.c]


def write_fixture_files(directory):
    """Materialize the fixtures as JSON files (tree + policies + instances)."""
    from .hypercube import instance_to_dict

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    out = {
        "seven_node_tree.json": tree_to_dict(seven_node_tree()),
        "policy_revisable.json": {"x": {str(v): val for v, val in enumerate(revisable_policy())}},
        "policy_stubborn.json": {"x": {str(v): val for v, val in enumerate(stubborn_policy())}},
        "fractional_cp_point.json": fractional_cp_point(),
        "dicut_example.json": instance_to_dict(dicut_example_instance()),
        "tall_tree_h4.json": instance_to_dict(tall_tree_instance(4)),
    }
    for name, data in out.items():
        with open(directory / name, "w") as fh:
            json.dump(data, fh, indent=1)
            fh.write("\n")
    return sorted(out)
