"""Scenario trees: data model, validation, generators, and transformations.

A scenario tree is a rooted tree whose nodes are uncertainty states.  Node
ids are dense integers 0..n-1 in BFS order with the root at 0, so parent
ids are always smaller than child ids and per-node data can live in plain
lists.  Stages are 1-based; every leaf sits at the final stage T.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Sequence


class TreeError(ValueError):
    """Malformed tree input (unknown node, bad parent list, ...)."""


class GenerationError(RuntimeError):
    """A randomized generator exhausted its retry or size budget."""


@dataclass(frozen=True)
class Violation:
    """First failed invariant found by :func:`validate`."""

    kind: str
    nodes: tuple
    message: str

    def __str__(self):
        return self.message


@dataclass(frozen=True)
class Scenario:
    """A complete root-to-leaf path together with its probability."""

    path: tuple
    probability: float

    @property
    def leaf(self):
        return self.path[-1]


class ScenarioTree:
    """Immutable rooted tree with stage bookkeeping and leaf probabilities.

    Parameters
    ----------
    parents:
        ``parents[v]`` is the parent id of node ``v``; ``parents[0]`` must be
        ``None``.  Ids must come in BFS order (``parents[v] < v``).
    leaf_prob:
        Mapping leaf id -> probability.  Defaults to the uniform-branching
        distribution (each child of a node equally likely).
    strategic_dim:
        Mapping stage -> number of strategic decisions per node of that
        stage (d^1_t).  Defaults to 1 everywhere.
    """

    def __init__(self, parents: Sequence, leaf_prob=None, strategic_dim=None):
        n = len(parents)
        if n == 0:
            raise TreeError("tree must have at least one node")
        if parents[0] is not None:
            raise TreeError("node 0 must be the root (parent None)")
        self.parent = tuple(parents)
        self.node_count = n
        self.root = 0
        children = [[] for _ in range(n)]
        stage = [0] * n
        stage[0] = 1
        for v in range(1, n):
            p = parents[v]
            if not isinstance(p, int) or not 0 <= p < v:
                raise TreeError(f"parent of node {v} must be an int < {v}, got {p!r}")
            children[p].append(v)
            stage[v] = stage[p] + 1
        self.children = tuple(tuple(c) for c in children)
        self.stage = tuple(stage)
        self.T = max(stage)
        self._leaves = tuple(v for v in range(n) if not children[v])
        dims = dict(strategic_dim or {})
        self.strategic_dim = {t: int(dims.get(t, 1)) for t in range(1, self.T + 1)}
        if any(d < 1 for d in self.strategic_dim.values()):
            raise TreeError("strategic dimensions must be positive")
        if leaf_prob is None:
            prob = self._uniform_branching_probabilities()
            self.leaf_probability = {v: prob[v] for v in self._leaves}
        else:
            self.leaf_probability = {int(v): float(p) for v, p in leaf_prob.items()}
        self._node_prob = None

    # -- basic queries ----------------------------------------------------

    def leaves(self):
        return self._leaves

    def is_leaf(self, v):
        return not self.children[v]

    def nodes_at_stage(self, t):
        return tuple(v for v in range(self.node_count) if self.stage[v] == t)

    def descendants(self, v):
        """All strict descendants of v, in increasing id order."""
        out = []
        stack = list(self.children[v])
        while stack:
            u = stack.pop()
            out.append(u)
            stack.extend(self.children[u])
        out.sort()
        return out

    def path_to_root(self, v):
        """Nodes from v up to the root, inclusive."""
        path = [v]
        while path[-1] != 0:
            path.append(self.parent[path[-1]])
        return path

    def ancestor_at_stage(self, v, t):
        """The ancestor of v (possibly v itself) at stage t."""
        if not 1 <= t <= self.stage[v]:
            raise TreeError(f"node {v} at stage {self.stage[v]} has no ancestor at stage {t}")
        while self.stage[v] > t:
            v = self.parent[v]
        return v

    def scenarios(self):
        out = []
        for leaf in self._leaves:
            path = tuple(reversed(self.path_to_root(leaf)))
            out.append(Scenario(path, self.leaf_probability.get(leaf, 0.0)))
        return out

    def node_probability(self, v):
        """Total probability of scenarios passing through v."""
        if self._node_prob is None:
            prob = [0.0] * self.node_count
            for leaf, p in self.leaf_probability.items():
                prob[leaf] += p
            for u in range(self.node_count - 1, 0, -1):
                prob[self.parent[u]] += prob[u]
            self._node_prob = prob
        return self._node_prob[v]

    def _uniform_branching_probabilities(self):
        prob = [0.0] * self.node_count
        prob[0] = 1.0
        for v in range(self.node_count):
            ch = self.children[v]
            if ch:
                share = prob[v] / len(ch)
                for u in ch:
                    prob[u] = share
        return prob

    def __repr__(self):
        return f"ScenarioTree(n={self.node_count}, T={self.T})"

    def _key(self):
        return (self.parent, tuple(sorted(self.strategic_dim.items())),
                tuple(sorted(self.leaf_probability.items())))

    def __eq__(self, other):
        return isinstance(other, ScenarioTree) and self._key() == other._key()

    def __hash__(self):
        return hash(self._key())


def validate(tree: ScenarioTree):
    """Check tree invariants; return None if OK, else the first Violation."""
    for v in range(1, tree.node_count):
        p = tree.parent[v]
        if tree.stage[v] != tree.stage[p] + 1:
            return Violation("stage", (v,), f"stage of node {v} is not parent stage + 1")
        if v not in tree.children[p]:
            return Violation("links", (v, p), f"node {v} missing from children of {p}")
    for v in tree.leaves():
        if tree.stage[v] != tree.T:
            return Violation(
                "leaf_stage", (v,), f"leaf {v} at stage {tree.stage[v]}, expected stage T={tree.T}"
            )
    for v in tree.leaf_probability:
        if not (isinstance(v, int) and 0 <= v < tree.node_count and tree.is_leaf(v)):
            return Violation("prob_key", (v,), f"probability assigned to non-leaf {v}")
        p = tree.leaf_probability[v]
        if not 0.0 < p <= 1.0:
            return Violation("prob_range", (v,), f"leaf {v} probability {p} outside (0,1]")
    missing = [v for v in tree.leaves() if v not in tree.leaf_probability]
    if missing:
        return Violation("prob_missing", tuple(missing), f"leaves without probability: {missing}")
    mass = sum(tree.leaf_probability.values())
    if abs(mass - 1.0) > 1e-9:
        return Violation("prob_mass", (), f"probability mass {mass:.10g}, expected 1")
    for t in range(1, tree.T + 1):
        if tree.strategic_dim.get(t, 1) < 1:
            return Violation("dim", (t,), f"strategic dimension at stage {t} not positive")
    return None


def join(tree: ScenarioTree, u: int, v: int) -> int:
    """Deepest common ancestor of u and v (u itself if v descends from u)."""
    for w in (u, v):
        if not 0 <= w < tree.node_count:
            raise TreeError(f"unknown node id {w}")
    while tree.stage[u] > tree.stage[v]:
        u = tree.parent[u]
    while tree.stage[v] > tree.stage[u]:
        v = tree.parent[v]
    while u != v:
        u = tree.parent[u]
        v = tree.parent[v]
    return u


# -- generators -----------------------------------------------------------

BTREE_STAGE_CAP = 20


def generate_btree(T: int, stage_cap: int = BTREE_STAGE_CAP) -> ScenarioTree:
    """Perfect binary tree with T stages, 2^T - 1 nodes, uniform leaves."""
    if T < 1:
        raise TreeError("T must be >= 1")
    if T > stage_cap:
        raise GenerationError(f"T={T} exceeds size cap {stage_cap}")
    n = 2 ** T - 1
    parents = [None] + [(v - 1) // 2 for v in range(1, n)]
    return ScenarioTree(parents)


def generate_stree(
    target_nodes: int,
    T: int,
    m: int = 3,
    rho: float = 0.5,
    tolerance: float = 0.05,
    seed: int = 0,
    max_attempts: int = 10000,
) -> ScenarioTree:
    """Sparse random tree of height T with about target_nodes nodes.

    Grows the tree by repeatedly picking a uniformly random childless node
    below stage T and giving it max{Binomial(m, rho), 1} children; the whole
    construction is retried until the node count falls within
    target_nodes * (1 +/- tolerance).  Scenario probabilities follow uniform
    branching.  Deterministic for a fixed seed.
    """
    if T < 1 or m < 1:
        raise TreeError("T and m must be >= 1")
    if not 0.0 < rho <= 1.0:
        raise TreeError("rho must be in (0, 1]")
    if tolerance < 0:
        raise TreeError("tolerance must be >= 0")
    rng = random.Random(seed)
    lo = target_nodes * (1.0 - tolerance)
    hi = target_nodes * (1.0 + tolerance)
    last = None
    for _ in range(max_attempts):
        parents = [None]
        stages = [1]
        open_nodes = [0] if T > 1 else []
        while open_nodes:
            i = rng.randrange(len(open_nodes))
            v = open_nodes[i]
            open_nodes[i] = open_nodes[-1]
            open_nodes.pop()
            k = max(sum(1 for _ in range(m) if rng.random() < rho), 1)
            for _ in range(k):
                parents.append(v)
                stages.append(stages[v] + 1)
                if stages[-1] < T:
                    open_nodes.append(len(parents) - 1)
        last = len(parents)
        if lo <= last <= hi:
            order = _bfs_order(parents)
            return ScenarioTree(_renumber(parents, order))
    raise GenerationError(
        f"no tree with {target_nodes}+/-{tolerance:.0%} nodes in {max_attempts} attempts "
        f"(last attempt had {last} nodes); adjust rho"
    )


def _bfs_order(parents):
    """Old-id order visiting nodes level by level (children in old-id order)."""
    n = len(parents)
    children = [[] for _ in range(n)]
    for v in range(1, n):
        children[parents[v]].append(v)
    order = [0]
    head = 0
    while head < len(order):
        order.extend(children[order[head]])
        head += 1
    return order


def _renumber(parents, order):
    new_id = {old: new for new, old in enumerate(order)}
    out = [None] * len(parents)
    for old, new in new_id.items():
        out[new] = None if parents[old] is None else new_id[parents[old]]
    return out


def split_multidim(tree: ScenarioTree):
    """Split stages with d^1_t > 1 into d^1_t one-dimensional stages.

    Each stage-t node with dimension k becomes a path of k nodes.  Returns
    the new tree plus a correspondence list mapping every new node id to
    (original node id, coordinate index).  Scenario count and probabilities
    are preserved exactly.
    """
    dims = tree.strategic_dim
    # new-node records in DFS creation order: (parent_record_id, orig, coord)
    records = []

    def expand(v, parent_rec):
        d = dims[tree.stage[v]]
        for i in range(d):
            records.append((parent_rec, v, i))
            parent_rec = len(records) - 1
        for u in tree.children[v]:
            expand(u, parent_rec)

    expand(0, None)
    parents = [r[0] for r in records]
    order = _bfs_order(parents)
    new_id = {old: new for new, old in enumerate(order)}
    new_parents = _renumber(parents, order)
    mapping = [None] * len(records)
    for old, new in new_id.items():
        mapping[new] = (records[old][1], records[old][2])
    leaf_prob = {}
    for old, rec in enumerate(records):
        orig = rec[1]
        if tree.is_leaf(orig) and rec[2] == dims[tree.stage[orig]] - 1:
            leaf_prob[new_id[old]] = tree.leaf_probability[orig]
    out = ScenarioTree(new_parents, leaf_prob=leaf_prob)
    return out, mapping


# -- JSON interchange -----------------------------------------------------


def tree_to_dict(tree: ScenarioTree) -> dict:
    return {
        "T": tree.T,
        "parents": [None] + [tree.parent[v] for v in range(1, tree.node_count)],
        "stage": list(tree.stage),
        "strategic_dim": [tree.strategic_dim[t] for t in range(1, tree.T + 1)],
        "leaf_prob": {str(v): p for v, p in sorted(tree.leaf_probability.items())},
    }


def tree_from_dict(data: dict) -> ScenarioTree:
    dims = {t + 1: d for t, d in enumerate(data.get("strategic_dim", []))}
    leaf_prob = {int(k): float(v) for k, v in data.get("leaf_prob", {}).items()}
    tree = ScenarioTree(data["parents"], leaf_prob=leaf_prob or None, strategic_dim=dims)
    if "T" in data and data["T"] != tree.T:
        raise TreeError(f"declared T={data['T']} but parents imply T={tree.T}")
    if "stage" in data and list(tree.stage) != list(data["stage"]):
        raise TreeError("declared stages inconsistent with parent structure")
    return tree


def save_tree(tree: ScenarioTree, path):
    with open(path, "w") as fh:
        json.dump(tree_to_dict(tree), fh, indent=1)
        fh.write("\n")


def load_tree(path) -> ScenarioTree:
    with open(path) as fh:
        return tree_from_dict(json.load(fh))
