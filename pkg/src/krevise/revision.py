"""Plans, revisions, and revisability checking on scenario trees.

A strategic policy assigns a value x(v) to every node.  A plan adjustment
policy assigns each node v a 0/1 vector over stages tau(v)..T; a node is
revised when its plan disagrees with its parent's plan on any shared stage.
A policy x is K-revisable when some compatible plan policy needs at most K
revisions along every scenario.

The combinatorial side works with equi-level binary embedded (ELBE)
subtrees: perfect binary structures embedded in the tree whose sibling
pairs sit at equal stages.  x is K-revisable exactly when no ELBE subtree
of height K+1 has all sibling pairs taking different x values; the maximum
"inconsistent value" over height-h subtrees is computed by a bottom-up DP
and doubles as the separation engine for subtree cuts.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

from .tree import ScenarioTree, join

_EPS = 1e-9


class PolicyError(ValueError):
    """Malformed policy input (bad length, out-of-range value, ...)."""


class GuardError(RuntimeError):
    """An exhaustive routine was called beyond its size guard."""


class PathInfeasibleError(ValueError):
    """(x, r) pair rejected by the path-formulation precondition."""

    def __init__(self, message, pair=None, scenario=None):
        super().__init__(message)
        self.pair = pair
        self.scenario = scenario


def _check_unit_values(tree, x):
    if len(x) != tree.node_count:
        raise PolicyError(f"policy has {len(x)} entries, tree has {tree.node_count} nodes")
    for v, val in enumerate(x):
        if not -_EPS <= val <= 1.0 + _EPS:
            raise PolicyError(f"x({v})={val} outside [0,1]")


def _check_binary(tree, x):
    _check_unit_values(tree, x)
    for v, val in enumerate(x):
        if abs(val - round(val)) > _EPS:
            raise PolicyError(f"x({v})={val} is not binary")


def _check_dim1(tree):
    if any(d != 1 for d in tree.strategic_dim.values()):
        raise PolicyError("operation requires one strategic decision per node; apply split_multidim first")


# -- plan adjustment policies ----------------------------------------------


@dataclass(frozen=True)
class PlanPolicy:
    """One plan per node; plans[v] covers stages tau(v)..T."""

    plans: tuple

    def plan(self, v):
        return self.plans[v]

    @staticmethod
    def from_lists(plans):
        return PlanPolicy(tuple(tuple(int(b) for b in p) for p in plans))


def _check_plan_lengths(tree, pi: PlanPolicy):
    if len(pi.plans) != tree.node_count:
        raise PolicyError("plan policy must define a plan for every node")
    for v, p in enumerate(pi.plans):
        want = tree.T - tree.stage[v] + 1
        if len(p) != want:
            raise PolicyError(f"plan at node {v} has length {len(p)}, expected {want}")


def revision_policy_of(tree: ScenarioTree, pi: PlanPolicy):
    """Derived revision policy: r(v)=1 iff v's plan differs from its parent's."""
    _check_plan_lengths(tree, pi)
    r = [0] * tree.node_count
    for v in range(1, tree.node_count):
        parent_suffix = pi.plans[tree.parent[v]][1:]
        r[v] = int(tuple(pi.plans[v]) != tuple(parent_suffix))
    return r


def is_compatible(tree: ScenarioTree, pi: PlanPolicy, x) -> bool:
    """True iff every plan's first entry equals x at that node."""
    _check_plan_lengths(tree, pi)
    return all(pi.plans[v][0] == x[v] for v in range(tree.node_count))


BRUTEFORCE_NODE_CAP = 18


def is_k_revisable_bruteforce(tree: ScenarioTree, x, K: int, node_cap=BRUTEFORCE_NODE_CAP) -> bool:
    """Oracle revisability check by exhaustive plan search.

    Enumerates the root plan and, at every node, the choice between
    inheriting the parent plan suffix and adopting any fresh plan whose
    first entry matches x.  Exponential; guarded to small trees.
    """
    if tree.node_count > node_cap:
        raise GuardError(f"brute force guarded to {node_cap} nodes, tree has {tree.node_count}")
    _check_dim1(tree)
    _check_binary(tree, x)
    if K >= tree.T - 1:
        return True
    xb = [int(round(v)) for v in x]
    T = tree.T
    memo = {}

    def feasible(v, plan, k):
        key = (v, plan, k)
        hit = memo.get(key)
        if hit is not None:
            return hit
        ok = True
        for u in tree.children[v]:
            suffix = plan[1:]
            good = suffix[0] == xb[u] and feasible(u, suffix, k)
            if not good and k >= 1:
                rest_len = T - tree.stage[u]
                for rest in product((0, 1), repeat=rest_len):
                    if feasible(u, (xb[u],) + rest, k - 1):
                        good = True
                        break
            if not good:
                ok = False
                break
        memo[key] = ok
        return ok

    root_rest = T - 1
    for rest in product((0, 1), repeat=root_rest):
        if feasible(0, (xb[0],) + rest, K):
            return True
    return False


def find_plan_bruteforce(tree: ScenarioTree, x, K: int, node_cap=BRUTEFORCE_NODE_CAP):
    """Witness-returning variant of the brute-force search.

    Returns a compatible plan policy whose revisions fit the budget K on
    every scenario, or None when x is not K-revisable.
    """
    if tree.node_count > node_cap:
        raise GuardError(f"brute force guarded to {node_cap} nodes, tree has {tree.node_count}")
    _check_dim1(tree)
    _check_binary(tree, x)
    xb = [int(round(v)) for v in x]
    T = tree.T
    K = min(K, T - 1)
    memo = {}

    def feasible(v, plan, k):
        key = (v, plan, k)
        hit = memo.get(key)
        if hit is not None:
            return hit[0]
        choices = []
        for u in tree.children[v]:
            suffix = plan[1:]
            if suffix[0] == xb[u] and feasible(u, suffix, k):
                choices.append(("inherit", suffix, k))
                continue
            found = None
            if k >= 1:
                for rest in product((0, 1), repeat=T - tree.stage[u]):
                    cand = (xb[u],) + rest
                    if feasible(u, cand, k - 1):
                        found = cand
                        break
            if found is None:
                memo[key] = (False, None)
                return False
            choices.append(("revise", found, k - 1))
        memo[key] = (True, choices)
        return True

    root_plan = None
    for rest in product((0, 1), repeat=T - 1):
        cand = (xb[0],) + rest
        if feasible(0, cand, K):
            root_plan = cand
            break
    if root_plan is None:
        return None
    plans = [None] * tree.node_count
    stack = [(0, root_plan, K)]
    while stack:
        v, plan, k = stack.pop()
        plans[v] = plan
        for u, (_, child_plan, child_k) in zip(tree.children[v], memo[(v, plan, k)][1]):
            stack.append((u, child_plan, child_k))
    return PlanPolicy(tuple(plans))


def reduce_only_child_revisions(tree: ScenarioTree, pi: PlanPolicy) -> PlanPolicy:
    """Rewrite a plan policy so no only-child node is revised.

    A revision at an only child can be absorbed into its parent's plan
    (every scenario through the parent passes the child, so per-scenario
    revision counts never increase).  Used to extend policies into the
    reduced complete-plan formulation.
    """
    _check_plan_lengths(tree, pi)
    plans = [tuple(p) for p in pi.plans]
    by_stage = sorted(range(1, tree.node_count), key=lambda v: -tree.stage[v])
    for v in by_stage:
        p = tree.parent[v]
        if len(tree.children[p]) == 1 and plans[v] != plans[p][1:]:
            plans[p] = (plans[p][0],) + plans[v]
    return PlanPolicy(tuple(plans))


# -- ELBE subtrees ----------------------------------------------------------


class ElbeSubtree:
    """Oriented ELBE subtree as a recursive binary structure.

    ``node`` is the tree node at this position; internal positions carry a
    (left, right) pair of same-stage nodes, with left holding the larger x
    value under the orientation used by the separation routines.
    """

    __slots__ = ("node", "left", "right")

    def __init__(self, node, left=None, right=None):
        if (left is None) != (right is None):
            raise PolicyError("ELBE subtree positions have zero or two children")
        self.node = node
        self.left = left
        self.right = right

    @property
    def root(self):
        return self.node

    @property
    def height(self):
        h = 0
        s = self
        while s.left is not None:
            h += 1
            s = s.left
        return h

    def sibling_pairs(self):
        """(left, right) node pairs, top-down left-to-right."""
        pairs = []
        frontier = [self]
        while frontier:
            nxt = []
            for s in frontier:
                if s.left is not None:
                    pairs.append((s.left.node, s.right.node))
                    nxt.extend((s.left, s.right))
            frontier = nxt
        return pairs

    def nodes(self):
        out = [self.node]
        if self.left is not None:
            out.extend(self.left.nodes())
            out.extend(self.right.nodes())
        return out

    def truncate(self, height):
        """Top part of the subtree with the given smaller height."""
        if height > self.height:
            raise PolicyError(f"cannot truncate height-{self.height} subtree to {height}")
        if height == 0:
            return ElbeSubtree(self.node)
        return ElbeSubtree(self.node, self.left.truncate(height - 1), self.right.truncate(height - 1))

    def to_jsonable(self):
        if self.left is None:
            return [self.node]
        return [self.node, self.left.to_jsonable(), self.right.to_jsonable()]

    @staticmethod
    def from_jsonable(data):
        if len(data) == 1:
            return ElbeSubtree(data[0])
        return ElbeSubtree(data[0], ElbeSubtree.from_jsonable(data[1]), ElbeSubtree.from_jsonable(data[2]))

    def __repr__(self):
        return f"ElbeSubtree(h={self.height}, root={self.node})"


def inconsistent_value(sub: ElbeSubtree, x) -> float:
    """Sum of |x(u) - x(v)| over the sibling pairs of the subtree."""
    return sum(abs(x[u] - x[v]) for u, v in sub.sibling_pairs())


def check_elbe(tree: ScenarioTree, sub: ElbeSubtree):
    """Validate ELBE structure against the host tree; raise on violation."""
    nodes = sub.nodes()
    if len(set(nodes)) != len(nodes):
        raise PolicyError("ELBE subtree repeats a node")

    def is_ancestor(a, d):
        while tree.stage[d] > tree.stage[a]:
            d = tree.parent[d]
        return d == a

    def rec(s):
        if s.left is None:
            return
        p, q = s.left.node, s.right.node
        if tree.stage[p] != tree.stage[q]:
            raise PolicyError(f"sibling pair ({p},{q}) not at equal stages")
        for c in (p, q):
            if not (is_ancestor(s.node, c) and s.node != c):
                raise PolicyError(f"{s.node} is not a strict ancestor of {c}")
        rec(s.left)
        rec(s.right)

    rec(sub)
    if sub.left is not None and join(tree, sub.left.node, sub.right.node) != sub.node:
        raise PolicyError("root of ELBE subtree is not the join of its children")


def _branches(tree, top, h):
    """All height-h pulled-up branch structures with the given top node."""
    if h == 0:
        yield ElbeSubtree(top)
        return
    desc = tree.descendants(top)
    by_stage = {}
    for d in desc:
        by_stage.setdefault(tree.stage[d], []).append(d)
    for same in by_stage.values():
        for i in range(len(same)):
            for j in range(i + 1, len(same)):
                p, q = same[i], same[j]
                for bp in _branches(tree, p, h - 1):
                    for bq in _branches(tree, q, h - 1):
                        yield ElbeSubtree(top, bp, bq)


def enumerate_elbe_subtrees(tree: ScenarioTree, height: int):
    """Every ELBE subtree of the given height, left/right in id order.

    Exhaustive; intended for tests and for materializing the full subtree
    formulation on small trees.  Height 0 yields each single node.
    """
    if height == 0:
        for v in range(tree.node_count):
            yield ElbeSubtree(v)
        return
    pairs = []
    for t in range(2, tree.T + 1):
        same = tree.nodes_at_stage(t)
        for i in range(len(same)):
            for j in range(i + 1, len(same)):
                pairs.append((same[i], same[j]))
    for p, q in pairs:
        r = join(tree, p, q)
        if height - 1 > tree.T - tree.stage[p]:
            continue
        for bp in _branches(tree, p, height - 1):
            for bq in _branches(tree, q, height - 1):
                yield ElbeSubtree(r, bp, bq)


# -- inconsistency DP (Algorithm: subtree separation) -----------------------


def _pull_up(sub: ElbeSubtree, top):
    if sub.node == top:
        return sub
    return ElbeSubtree(top, sub.left, sub.right)


def _inconsistency_tables(tree: ScenarioTree, x, hmax: int):
    """Bottom-up DP for the largest inconsistent value of height-h subtrees.

    Returns (table, wit) where table[(v, h)] is the maximum inconsistent
    value over height-h ELBE subtrees inside the subtree rooted at v, and
    wit[(v, h)] a maximizing oriented witness.  Heights run 1..hmax.  The
    per-node aggregates keep, for each (stage, height) pair, the best
    descendant value of Delta(d, h) + x(d) and Delta(d, h) - x(d), which
    turns the pairwise maximization into a cross of child aggregates.
    """
    T = tree.T
    table = {}
    wit = {}
    agg = [None] * tree.node_count  # (stage, g) -> [val+, node+, val-, node-]

    def single(d):
        return ElbeSubtree(d)

    for v in range(tree.node_count - 1, -1, -1):
        ch = tree.children[v]
        sv = tree.stage[v]
        # table rows for v
        for h in range(1, min(hmax, T - sv) + 1):
            g = h - 1
            best = None
            best_pair = None
            best_children = None
            for s in range(sv + 1, T - g + 1):
                entries = []
                for u in ch:
                    e = agg[u].get((s, g))
                    if e is not None:
                        entries.append(e)
                for i in range(len(entries)):
                    for j in range(i + 1, len(entries)):
                        a, b = entries[i], entries[j]
                        for val, p, q in (
                            (a[0] + b[2], a[1], b[3]),
                            (b[0] + a[2], b[1], a[3]),
                        ):
                            key = (min(p, q), max(p, q))
                            if best is None or val > best + _EPS or (
                                abs(val - best) <= _EPS and key < best_pair
                            ):
                                best = val
                                best_pair = key
                                best_children = (p, q, g)
            if best_children is not None:
                p, q, g0 = best_children
                wp = single(p) if g0 == 0 else _pull_up(wit[(p, g0)], p)
                wq = single(q) if g0 == 0 else _pull_up(wit[(q, g0)], q)
                cand_wit = ElbeSubtree(v, wp, wq)
            else:
                cand_wit = None
            for u in ch:
                got = table.get((u, h))
                if got is not None and (best is None or got > best + _EPS):
                    best = got
                    cand_wit = wit[(u, h)]
            if best is not None:
                table[(v, h)] = best
                wit[(v, h)] = cand_wit
        # aggregate for v: own entries + merged child entries
        mine = {}
        gmax = min(hmax - 1, T - sv)
        for g in range(0, gmax + 1):
            if g == 0:
                val = 0.0
            else:
                val = table.get((v, g))
                if val is None:
                    continue
            mine[(sv, g)] = [val + x[v], v, val - x[v], v]
        for u in ch:
            for key, e in agg[u].items():
                cur = mine.get(key)
                if cur is None:
                    mine[key] = list(e)
                else:
                    if e[0] > cur[0] + _EPS or (abs(e[0] - cur[0]) <= _EPS and e[1] < cur[1]):
                        cur[0], cur[1] = e[0], e[1]
                    if e[2] > cur[2] + _EPS or (abs(e[2] - cur[2]) <= _EPS and e[3] < cur[3]):
                        cur[2], cur[3] = e[2], e[3]
            agg[u] = None  # free
        agg[v] = mine
    return table, wit


def max_inconsistency(tree: ScenarioTree, x, K: int):
    """Largest inconsistent value over height-(K+1) ELBE subtrees.

    Returns (delta, witness); witness is None exactly when no height-(K+1)
    subtree exists (T <= K+1), in which case delta is 0.  Fractional x in
    [0,1] is accepted; witness pairs are oriented with x(left) >= x(right).
    """
    _check_dim1(tree)
    _check_unit_values(tree, x)
    if K < 0:
        raise PolicyError("K must be >= 0")
    if K + 1 > tree.T - 1:
        return 0.0, None
    table, wit = _inconsistency_tables(tree, x, K + 1)
    got = table.get((0, K + 1))
    if got is None:
        return 0.0, None
    return got, wit[(0, K + 1)]


def inconsistency_profile(tree: ScenarioTree, x):
    """Delta(root, h) for every height h in 1..T-1 (None when no subtree)."""
    _check_dim1(tree)
    _check_unit_values(tree, x)
    if tree.T < 2:
        return {}
    table, _ = _inconsistency_tables(tree, x, tree.T - 1)
    return {h: table.get((0, h)) for h in range(1, tree.T)}


def node_inconsistency_table(tree: ScenarioTree, x, hmax: int):
    """Delta(v, h) for every node and h in 0..hmax.

    Heights with no ELBE subtree below v report 0.  These are the true
    per-node inconsistency values; note the subtree DP formulation's rows
    can force slightly larger Delta variables where one branch of a pair
    has no subtree of the required height.
    """
    _check_dim1(tree)
    _check_unit_values(tree, x)
    table, _ = _inconsistency_tables(tree, x, hmax)
    out = {}
    for v in range(tree.node_count):
        for h in range(0, hmax + 1):
            out[(v, h)] = table.get((v, h), 0.0) if h else 0.0
    return out


def is_k_revisable(tree: ScenarioTree, x, K: int) -> bool:
    """Polynomial revisability check via the ELBE subtree characterization."""
    _check_binary(tree, x)
    if K >= tree.T - 1:
        return True
    delta, _ = max_inconsistency(tree, x, K)
    return delta <= 2 ** (K + 1) - 2 + _EPS


def min_revisability(tree: ScenarioTree, x) -> int:
    """Smallest K making x K-revisable, by binary search on K."""
    _check_binary(tree, x)
    lo, hi = 0, tree.T - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if is_k_revisable(tree, x, mid):
            hi = mid
        else:
            lo = mid + 1
    return lo


# -- fast separation for binary policies (bottom-up, O(|N| T)) --------------


def tallest_inconsistent(tree: ScenarioTree, x):
    """Tallest x-inconsistent ELBE subtree for binary x (height may be 0).

    Propagates one tallest witness per node bottom-up; at each node it
    scans descendants level by level for a pair of equal-height witnesses
    whose top nodes take different x values, joining them one level taller.
    """
    _check_dim1(tree)
    _check_binary(tree, x)
    xb = [int(round(v)) for v in x]
    T = tree.T
    height = [0] * tree.node_count
    sub = [None] * tree.node_count
    for v in range(tree.node_count - 1, -1, -1):
        ch = tree.children[v]
        if not ch:
            sub[v] = ElbeSubtree(v)
            continue
        h0 = max(height[u] for u in ch)
        frontier = [u for u in ch if height[u] == h0]
        level = tree.stage[v] + 1
        found = None
        while frontier and level <= T - h0 and found is None:
            zero = one = None
            for d in frontier:
                if xb[d] == 0:
                    if zero is None or d < zero:
                        zero = d
                else:
                    if one is None or d < one:
                        one = d
            if zero is not None and one is not None:
                found = (one, zero)
                break
            nxt = []
            for d in frontier:
                nxt.extend(u for u in tree.children[d] if height[u] == h0)
            frontier = nxt
            level += 1
        if found is not None:
            one, zero = found
            sub[v] = ElbeSubtree(v, _pull_up(sub[one], one), _pull_up(sub[zero], zero))
            height[v] = h0 + 1
        else:
            pick = min(u for u in ch if height[u] == h0)
            sub[v] = sub[pick]
            height[v] = h0
    return sub[0]


def separate_binary_fast(tree: ScenarioTree, x, K: int) -> Optional[ElbeSubtree]:
    """Oriented x-inconsistent ELBE subtree of height >= K+1, or None."""
    best = tallest_inconsistent(tree, x)
    if best.height >= K + 1:
        return best
    return None


# -- plan reconstruction from (x, r) ----------------------------------------


def _path_between(tree, mu, nu):
    """Nodes on the mu-nu path with their join removed (P*)."""
    w = join(tree, mu, nu)
    out = []
    for end in (mu, nu):
        v = end
        while v != w:
            out.append(v)
            v = tree.parent[v]
    return out


def check_path_feasible(tree: ScenarioTree, x, r, K=None):
    """Raise PathInfeasibleError unless (x, r) satisfies the path rows.

    The rows require at least one revision strictly between any same-stage
    pair with different x values, plus (when K is given) per-scenario
    revision budgets.
    """
    _check_binary(tree, x)
    for t in range(2, tree.T + 1):
        same = tree.nodes_at_stage(t)
        for i in range(len(same)):
            for j in range(i + 1, len(same)):
                mu, nu = same[i], same[j]
                if x[mu] != x[nu] and not any(r[v] for v in _path_between(tree, mu, nu)):
                    raise PathInfeasibleError(
                        f"pair ({mu},{nu}) has different x values but no revision between them",
                        pair=(mu, nu),
                    )
    if K is not None:
        for sc in tree.scenarios():
            used = sum(int(r[v]) for v in sc.path)
            if used > K:
                raise PathInfeasibleError(
                    f"scenario through leaf {sc.leaf} uses {used} revisions, budget {K}",
                    scenario=sc.path,
                )


def extend_policy_to_plan(tree: ScenarioTree, x, r, K=None) -> PlanPolicy:
    """Construct a plan policy for (x, r) satisfying the path rows.

    At the root and at every revised node the plan copies x down a longest
    revision-free descending path and pads with zeros; unrevised nodes
    inherit the nearest revised ancestor's plan.  The result is compatible
    with x and revises only within the support of r.
    """
    check_path_feasible(tree, x, r, K=K)
    xb = [int(round(v)) for v in x]
    T = tree.T
    plans = [None] * tree.node_count

    def longest_free_path(v):
        best = [v]
        for u in tree.children[v]:
            if not r[u]:
                cand = [v] + longest_free_path(u)
                if len(cand) > len(best):
                    best = cand
        return best

    anchors = [0] + [v for v in range(1, tree.node_count) if r[v]]
    for v in anchors:
        walk = longest_free_path(v)
        entries = [xb[u] for u in walk]
        entries += [0] * (T - tree.stage[v] + 1 - len(entries))
        plans[v] = tuple(entries)
    for v in range(1, tree.node_count):
        if plans[v] is None:
            plans[v] = plans[tree.parent[v]][1:]
    return PlanPolicy(tuple(plans))
