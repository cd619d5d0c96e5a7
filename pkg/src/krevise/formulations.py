"""MIP formulation builders for the K-revisable set.

All builders emit rows over a shared block of binary strategic variables
tagged "x:{node}" (or "x:{node}:{coord}" for vector stages).  The complete
plan family (CP, CP+) adds plan and revision variables; the subtree family
(ST cuts, STDP, CP++) adds continuous inconsistency variables Delta(v,h).
`add_revision_rows` grafts any of them onto an existing model that tags
its strategic block, which is how base problems get their revision
constraint attached.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import BINARY, CONTINUOUS, INF, MAX, ModelIR
from .revision import (
    ElbeSubtree,
    PolicyError,
    enumerate_elbe_subtrees,
    max_inconsistency,
    separate_binary_fast,
)
from .tree import ScenarioTree, join

CP = "cp"
CP_PLUS = "cp+"
CP_PLUS_PLUS = "cp++"
ST = "st"
STDP = "stdp"
PATH = "path"

FORMULATION_KINDS = (CP, CP_PLUS, CP_PLUS_PLUS, ST, STDP, PATH)


@dataclass(frozen=True)
class RevisionFormulationSpec:
    kind: str
    K: int
    vector_mode: bool = False

    def __post_init__(self):
        if self.kind not in FORMULATION_KINDS:
            raise PolicyError(f"unknown formulation kind {self.kind!r}")
        if self.K < 0:
            raise PolicyError("K must be >= 0")
        if self.vector_mode and self.kind not in (CP, CP_PLUS):
            raise PolicyError(
                f"{self.kind} supports only one strategic decision per node; "
                "apply split_multidim or use a CP-family formulation in vector mode"
            )


@dataclass(frozen=True)
class Cut:
    """Model-independent linear row over symbolic (family, node) keys."""

    name: str
    terms: tuple  # ((family, node), coefficient)
    sense: str
    rhs: float

    def bind(self, lookup):
        return [(lookup(fam, node), coef) for (fam, node), coef in self.terms]


# -- strategic block -----------------------------------------------------------


def x_name(v, coord=None):
    return f"x_{v}" if coord is None else f"x_{v}_{coord}"


def add_strategic_block(model: ModelIR, tree: ScenarioTree):
    """Binary x variables per node (and coordinate), tagged for later reuse."""
    xv = {}
    for v in range(tree.node_count):
        coords = range(tree.strategic_dim[tree.stage[v]])
        multi = tree.strategic_dim[tree.stage[v]] > 1
        for i in coords:
            coord = i if multi else None
            tag = f"x:{v}" if coord is None else f"x:{v}:{coord}"
            xv[(v, i)] = model.add_var(x_name(v, coord), BINARY, tag=tag)
    return xv


def strategic_block_of(model: ModelIR, tree: ScenarioTree):
    """Recover the tagged x block; per-stage coordinate sets must agree.

    A stage may legitimately carry no strategic decisions (its nodes then
    appear with an empty coordinate map); a one-dimensional block uses the
    bare "x:{node}" tag with coordinate None.
    """
    raw = {v: {} for v in range(tree.node_count)}
    for tag, idx in model.var_tags.items():
        parts = tag.split(":")
        if parts[0] != "x":
            continue
        v = int(parts[1])
        if not 0 <= v < tree.node_count:
            raise PolicyError(f"tag {tag!r} references a node outside the tree")
        coord = parts[2] if len(parts) > 2 else None
        raw[v][coord] = idx
    per_stage = {}
    for v, coords in raw.items():
        key = tuple(sorted(coords, key=str))
        t = tree.stage[v]
        if per_stage.setdefault(t, key) != key:
            raise PolicyError(f"nodes at stage {t} tag different strategic coordinates")
    coord_lists = {t: list(per_stage.get(t, ())) for t in range(1, tree.T + 1)}
    if all(not coord_lists[t] for t in coord_lists):
        raise PolicyError("model tags no strategic block")
    return raw, coord_lists


# -- complete plan family (CP, CP+) --------------------------------------------


def only_child_nodes(tree: ScenarioTree):
    return {v for v in range(1, tree.node_count) if len(tree.children[tree.parent[v]]) == 1}


def _nearest_kept_ancestor(tree, only):
    pabar = {}
    for v in range(1, tree.node_count):
        w = tree.parent[v]
        while w in only:
            w = tree.parent[w]
        pabar[v] = w
    return pabar


def add_cp_rows(model: ModelIR, tree: ScenarioTree, K: int, xblock, coord_lists, reduced: bool,
                prefix=""):
    """CP (reduced=False) or CP+ (reduced=True) rows on top of an x block.

    In the reduced variant, only-child nodes carry no plan or revision
    variables: their compatibility rows read the nearest kept ancestor's
    plan and the scenario budgets skip them.  The revision budget is shared
    across stage coordinates (one r per node).
    """
    T = tree.T
    only = only_child_nodes(tree) if reduced else set()
    pabar = _nearest_kept_ancestor(tree, only)
    pi = {}
    for v in range(tree.node_count):
        if v in only:
            continue
        for t in range(tree.stage[v], T + 1):
            for coord in coord_lists[t]:
                pi[(v, t, coord)] = model.add_var(
                    f"{prefix}pi_{v}_{t}" + (f"_{coord}" if coord is not None else ""),
                    BINARY,
                    tag=f"{prefix}pi:{v}:{t}" + (f":{coord}" if coord is not None else ""),
                )
    r = {}
    for v in range(1, tree.node_count):
        if v in only:
            continue
        r[v] = model.add_var(f"{prefix}r_{v}", BINARY, tag=f"{prefix}r:{v}")
    # compatibility: x(v) equals the governing plan's entry for stage tau(v)
    for v in range(tree.node_count):
        owner = pabar[v] if v in only else v
        for coord in coord_lists[tree.stage[v]]:
            model.add_constraint(
                f"{prefix}compat:{v}" + (f":{coord}" if coord is not None else ""),
                [(xblock[v][coord], 1.0), (pi[(owner, tree.stage[v], coord)], -1.0)],
                "=",
                0.0,
            )
    # revision linking against the nearest kept ancestor's plan
    for v in range(1, tree.node_count):
        if v in only:
            continue
        up = pabar[v]
        for t in range(tree.stage[v], T + 1):
            for coord in coord_lists[t]:
                suffix = f":{coord}" if coord is not None else ""
                a = pi[(v, t, coord)]
                b = pi[(up, t, coord)]
                model.add_constraint(
                    f"{prefix}linkp:{v}:{t}{suffix}",
                    [(r[v], 1.0), (a, -1.0), (b, 1.0)],
                    ">=",
                    0.0,
                )
                model.add_constraint(
                    f"{prefix}linkm:{v}:{t}{suffix}",
                    [(r[v], 1.0), (a, 1.0), (b, -1.0)],
                    ">=",
                    0.0,
                )
    for sc in tree.scenarios():
        terms = [(r[v], 1.0) for v in sc.path if v != 0 and v not in only]
        model.add_constraint(f"{prefix}budget:{sc.leaf}", terms, "<=", float(K))
    return pi, r


# -- subtree cuts ----------------------------------------------------------------


def subtree_constraint_of(oriented: ElbeSubtree, name=None) -> Cut:
    """sum over oriented pairs of (x(u) - x(v)) <= 2^h - 2."""
    h = oriented.height
    if h < 1:
        raise PolicyError("subtree constraints need height >= 1")
    terms = []
    for u, v in oriented.sibling_pairs():
        terms.append((("x", u), 1.0))
        terms.append((("x", v), -1.0))
    rhs = float(2 ** h - 2)
    return Cut(name or f"st:h={h}:root={oriented.root}", tuple(terms), "<=", rhs)


def facet_inequality_of(tree: ScenarioTree, K: int, oriented: ElbeSubtree,
                        skip_r=(), name=None) -> Cut:
    """Revision-aware subtree inequality over (r, x).

    sum of r over ancestors of the subtree root (root included, tree root
    and `skip_r` nodes excluded) plus the oriented pair differences is at
    most K - h + 2^h - 1.  Height h must be in [K] with the root deeper
    than stage K - h; a height-0 subtree at a leaf degenerates to that
    scenario's budget row.
    """
    h = oriented.height
    if not 0 <= h <= K:
        raise PolicyError(f"facet inequalities need height in [0..K], got {h}")
    if tree.stage[oriented.root] <= K - h:
        raise PolicyError(
            f"facet inequality needs stage(root) > K - h; got stage {tree.stage[oriented.root]}"
        )
    if h == 0 and not tree.is_leaf(oriented.root):
        raise PolicyError("height-0 facet inequalities are leaf budget rows")
    terms = []
    for w in tree.path_to_root(oriented.root):
        if w != 0 and w not in skip_r:
            terms.append((("r", w), 1.0))
    for u, v in oriented.sibling_pairs():
        terms.append((("x", u), 1.0))
        terms.append((("x", v), -1.0))
    rhs = float(K - h + 2 ** h - 1)
    return Cut(name or f"cpfacet:h={h}:root={oriented.root}", tuple(terms), "<=", rhs)


def all_subtree_cuts(tree: ScenarioTree, K: int, orientation_cap=200000):
    """Every oriented height-(K+1) subtree constraint (small trees only)."""
    count = 0
    for sub in enumerate_elbe_subtrees(tree, K + 1):
        for oriented in _orientations(sub):
            count += 1
            if count > orientation_cap:
                raise PolicyError(
                    f"more than {orientation_cap} oriented subtree constraints; "
                    "use cut_loop_st instead"
                )
            yield subtree_constraint_of(oriented, name=f"st:h={K + 1}:seq={count}")


def _orientations(sub: ElbeSubtree):
    if sub.left is None:
        yield sub
        return
    for L in _orientations(sub.left):
        for R in _orientations(sub.right):
            yield ElbeSubtree(sub.node, L, R)
            yield ElbeSubtree(sub.node, R, L)


# -- subtree DP formulation (STDP) ------------------------------------------------


def height_window(tree: ScenarioTree, v: int, K: int):
    """Heights worth tracking at node v for budget K: H(v, K)."""
    lo = max(1, K - tree.stage[v] + 1)
    hi = min(K + 1, tree.T - tree.stage[v])
    return range(lo, hi + 1)


def _same_stage_join_pairs(tree: ScenarioTree, v: int):
    """Same-stage descendant pairs whose join is exactly v, via child groups."""
    groups = []
    for u in tree.children[v]:
        by_stage = {}
        for d in [u] + tree.descendants(u):
            by_stage.setdefault(tree.stage[d], []).append(d)
        groups.append(by_stage)
    for gi in range(len(groups)):
        for gj in range(gi + 1, len(groups)):
            shared = set(groups[gi]) & set(groups[gj])
            for s in sorted(shared):
                for p in groups[gi][s]:
                    for q in groups[gj][s]:
                        yield p, q


def add_stdp_rows(model: ModelIR, tree: ScenarioTree, K: int, xv, prefix=""):
    """STDP rows: Delta(v,h) variables, DP recurrences, and the root budget.

    Delta(v, h-1) terms vanish (value 0) when h = 1; pair rows are emitted
    in both orders so Delta dominates |x(p) - x(q)| contributions.
    """
    delta = {}
    for v in range(tree.node_count):
        if tree.is_leaf(v):
            continue
        for h in height_window(tree, v, K):
            delta[(v, h)] = model.add_var(
                f"{prefix}Delta_{v}_{h}", CONTINUOUS, 0.0, INF, tag=f"{prefix}Delta:{v}:{h}"
            )
    seq = 0
    for v in range(tree.node_count):
        if tree.is_leaf(v):
            continue
        window = list(height_window(tree, v, K))
        if window:
            pairs = list(_same_stage_join_pairs(tree, v))
            for h in window:
                g = h - 1
                for p, q in pairs:
                    if g > 0 and ((p, g) not in delta or (q, g) not in delta):
                        continue
                    base = [(delta[(v, h)], 1.0)]
                    if g > 0:
                        base += [(delta[(p, g)], -1.0), (delta[(q, g)], -1.0)]
                    seq += 1
                    model.add_constraint(
                        f"{prefix}stdp:pair:{v}:{h}:{seq}",
                        base + [(xv[p], -1.0), (xv[q], 1.0)],
                        ">=",
                        0.0,
                    )
                    seq += 1
                    model.add_constraint(
                        f"{prefix}stdp:pair:{v}:{h}:{seq}",
                        base + [(xv[p], 1.0), (xv[q], -1.0)],
                        ">=",
                        0.0,
                    )
        for u in tree.children[v]:
            for h in window:
                if (u, h) in delta:
                    model.add_constraint(
                        f"{prefix}stdp:child:{v}:{u}:{h}",
                        [(delta[(v, h)], 1.0), (delta[(u, h)], -1.0)],
                        ">=",
                        0.0,
                    )
    if (0, K + 1) in delta:
        model.add_constraint(
            f"{prefix}stdp:budget", [(delta[(0, K + 1)], 1.0)], "<=", float(2 ** (K + 1) - 2)
        )
    return delta


def add_facet_rows(model: ModelIR, tree: ScenarioTree, K: int, r, delta, skip, prefix=""):
    """Delta-linked facet rows: sum of r above v plus Delta(v,h) is capped."""
    for v in range(tree.node_count):
        if tree.is_leaf(v):
            continue
        ancestors = [w for w in tree.path_to_root(v) if w != 0 and w not in skip]
        for h in height_window(tree, v, K):
            terms = [(r[w], 1.0) for w in ancestors] + [(delta[(v, h)], 1.0)]
            model.add_constraint(
                f"{prefix}cpfacet:{v}:{h}", terms, "<=", float(K - h + 2 ** h - 1)
            )


def add_path_rows(model: ModelIR, tree: ScenarioTree, K: int, xv, prefix=""):
    """Path formulation over (x, r): revisions separate unequal same-stage pairs."""
    r = {}
    for v in range(1, tree.node_count):
        r[v] = model.add_var(f"{prefix}r_{v}", BINARY, tag=f"{prefix}r:{v}")
    for t in range(2, tree.T + 1):
        same = tree.nodes_at_stage(t)
        for i in range(len(same)):
            for j in range(len(same)):
                if i == j:
                    continue
                mu, nu = same[i], same[j]
                w = join(tree, mu, nu)
                terms = []
                for end in (mu, nu):
                    d = end
                    while d != w:
                        terms.append((r[d], 1.0))
                        d = tree.parent[d]
                terms += [(xv[mu], -1.0), (xv[nu], 1.0)]
                model.add_constraint(f"{prefix}path:{mu}:{nu}", terms, ">=", 0.0)
    for sc in tree.scenarios():
        terms = [(r[v], 1.0) for v in sc.path if v != 0]
        model.add_constraint(f"{prefix}budget:{sc.leaf}", terms, "<=", float(K))
    return r


# -- whole-fragment builders -----------------------------------------------------


def _dim1_xv(tree, xblock):
    return {v: xblock[v][None] for v in range(tree.node_count)}


def _require_dim1(tree, kind):
    if any(d != 1 for d in tree.strategic_dim.values()):
        raise PolicyError(
            f"{kind} requires one strategic decision per node; apply split_multidim "
            "first or use a CP-family formulation in vector mode"
        )


def _fresh(tree, name):
    model = ModelIR(name)
    add_strategic_block(model, tree)
    xblock, coord_lists = strategic_block_of(model, tree)
    return model, xblock, coord_lists


def build_cp(tree: ScenarioTree, K: int, vector_mode=False) -> ModelIR:
    """Complete plan formulation (x, pi, r) as a standalone model."""
    if not vector_mode:
        _require_dim1(tree, CP)
    model, xblock, coord_lists = _fresh(tree, f"cp_K{K}")
    add_cp_rows(model, tree, K, xblock, coord_lists, reduced=False)
    return model


def build_cp_plus(tree: ScenarioTree, K: int, vector_mode=False) -> ModelIR:
    """CP with only-child plan and revision variables eliminated."""
    if not vector_mode:
        _require_dim1(tree, CP_PLUS)
    model, xblock, coord_lists = _fresh(tree, f"cp+_K{K}")
    add_cp_rows(model, tree, K, xblock, coord_lists, reduced=True)
    return model


def build_stdp(tree: ScenarioTree, K: int) -> ModelIR:
    _require_dim1(tree, STDP)
    model, xblock, _ = _fresh(tree, f"stdp_K{K}")
    add_stdp_rows(model, tree, K, _dim1_xv(tree, xblock))
    return model


def build_cp_pp(tree: ScenarioTree, K: int) -> ModelIR:
    """CP+ rows plus STDP rows plus the Delta-linked facet family."""
    _require_dim1(tree, CP_PLUS_PLUS)
    model, xblock, coord_lists = _fresh(tree, f"cp++_K{K}")
    xv = _dim1_xv(tree, xblock)
    _, r = add_cp_rows(model, tree, K, xblock, coord_lists, reduced=True)
    delta = add_stdp_rows(model, tree, K, xv)
    add_facet_rows(model, tree, K, r, delta, skip=only_child_nodes(tree))
    return model


def build_path(tree: ScenarioTree, K: int) -> ModelIR:
    _require_dim1(tree, PATH)
    model, xblock, _ = _fresh(tree, f"path_K{K}")
    add_path_rows(model, tree, K, _dim1_xv(tree, xblock))
    return model


def build_st(tree: ScenarioTree, K: int, orientation_cap=200000) -> ModelIR:
    """Subtree formulation with every oriented cut materialized (small trees)."""
    _require_dim1(tree, ST)
    model, xblock, _ = _fresh(tree, f"st_K{K}")
    xv = _dim1_xv(tree, xblock)
    for cut in all_subtree_cuts(tree, K, orientation_cap=orientation_cap):
        model.add_constraint(cut.name, cut.bind(lambda fam, node: xv[node]), cut.sense, cut.rhs)
    return model


def build(kind, tree, K, vector_mode=False) -> ModelIR:
    spec = RevisionFormulationSpec(kind, K, vector_mode)
    if spec.kind == CP:
        return build_cp(tree, K, vector_mode)
    if spec.kind == CP_PLUS:
        return build_cp_plus(tree, K, vector_mode)
    if spec.kind == CP_PLUS_PLUS:
        return build_cp_pp(tree, K)
    if spec.kind == STDP:
        return build_stdp(tree, K)
    if spec.kind == PATH:
        return build_path(tree, K)
    return build_st(tree, K)


def add_revision_rows(model: ModelIR, tree: ScenarioTree, spec: RevisionFormulationSpec,
                      prefix="rev:"):
    """Graft the chosen revision formulation onto a model's tagged x block."""
    xblock, coord_lists = strategic_block_of(model, tree)
    dim1 = all(coord_lists[t] == [None] for t in coord_lists)
    if spec.kind in (CP, CP_PLUS):
        if not dim1 and not spec.vector_mode:
            raise PolicyError(
                "strategic block is vector-valued; pass vector_mode=True or split stages"
            )
        add_cp_rows(model, tree, spec.K, xblock, coord_lists,
                    reduced=(spec.kind == CP_PLUS), prefix=prefix)
        return model
    if not dim1:
        raise PolicyError(
            f"{spec.kind} needs a one-dimensional strategic block; apply split_multidim "
            "or use a CP-family formulation in vector mode"
        )
    xv = {v: xblock[v][None] for v in range(tree.node_count)}
    if spec.kind == STDP:
        add_stdp_rows(model, tree, spec.K, xv, prefix=prefix)
    elif spec.kind == CP_PLUS_PLUS:
        _, r = add_cp_rows(model, tree, spec.K, xblock, coord_lists, reduced=True, prefix=prefix)
        delta = add_stdp_rows(model, tree, spec.K, xv, prefix=prefix)
        add_facet_rows(model, tree, spec.K, r, delta, skip=only_child_nodes(tree), prefix=prefix)
    elif spec.kind == PATH:
        add_path_rows(model, tree, spec.K, xv, prefix=prefix)
    elif spec.kind == ST:
        for cut in all_subtree_cuts(tree, spec.K):
            model.add_constraint(prefix + cut.name, cut.bind(lambda fam, node: xv[node]),
                                 cut.sense, cut.rhs)
    else:
        raise PolicyError(f"unhandled kind {spec.kind}")
    return model


# -- iterative subtree cut loop ----------------------------------------------------


class CutLoopNonconvergence(RuntimeError):
    def __init__(self, message, best_value=None, rounds=0, cuts_added=0):
        super().__init__(message)
        self.best_value = best_value
        self.rounds = rounds
        self.cuts_added = cuts_added


@dataclass
class CutLoopResult:
    value: float
    assignment: dict
    x: list
    cuts_added: int
    rounds: int
    status: str


def cut_loop_st(tree: ScenarioTree, K: int, base: ModelIR, solve=None, mode="lp",
                max_rounds=500, tol=1e-6) -> CutLoopResult:
    """Solve with subtree constraints generated on the fly.

    Each round solves the current model, separates the incumbent x (the DP
    separator for fractional points, the fast bottom-up one for integral
    points), adds the violated height-(K+1) cut, and repeats until no
    violation remains.  The base model must tag its x block and is extended
    in place.
    """
    from .solver import solve_lp, solve_mip  # local import to avoid a cycle

    if mode not in ("lp", "mip"):
        raise PolicyError(f"mode must be 'lp' or 'mip', got {mode!r}")
    xblock, coord_lists = strategic_block_of(base, tree)
    if any(coord_lists[t] != [None] for t in coord_lists):
        raise PolicyError("cut_loop_st needs a one-dimensional strategic block")
    xv = {v: xblock[v][None] for v in range(tree.node_count)}
    names = {v: base.variables[xv[v]].name for v in xv}
    if solve is None:
        solve = solve_lp if mode == "lp" else solve_mip
    bound = 2 ** (K + 1) - 2
    cuts = 0
    last = None
    for rounds in range(1, max_rounds + 1):
        res = solve(base)
        if res.status != "optimal":
            raise CutLoopNonconvergence(
                f"solver returned status {res.status} in cut loop round {rounds}",
                best_value=getattr(res, "bound", None), rounds=rounds, cuts_added=cuts,
            )
        last = res
        xvals = [min(1.0, max(0.0, res.assignment[names[v]])) for v in range(tree.node_count)]
        if mode == "lp":
            delta, witness = max_inconsistency(tree, xvals, K)
            if delta <= bound + tol or witness is None:
                return CutLoopResult(res.objective, res.assignment, xvals, cuts, rounds, "optimal")
        else:
            xr = [round(val) for val in xvals]
            witness = separate_binary_fast(tree, xr, K)
            if witness is None:
                return CutLoopResult(res.objective, res.assignment, xvals, cuts, rounds, "optimal")
            witness = witness.truncate(K + 1)
        cuts += 1
        cut = subtree_constraint_of(witness, name=f"stcut:{cuts}")
        base.add_constraint(cut.name, cut.bind(lambda fam, node: xv[node]), cut.sense, cut.rhs)
    raise CutLoopNonconvergence(
        f"no convergence in {max_rounds} rounds",
        best_value=last.objective if last else None, rounds=max_rounds, cuts_added=cuts,
    )


# -- partially adaptive restriction ------------------------------------------------


def partially_adaptive_groups(tree: ScenarioTree, stages):
    """Nodes grouped by their ancestor at the most recent adaptive stage.

    Within each group the strategic decision must be identical; stage 1 is
    always an implicit anchor.
    """
    adaptive = sorted(set(stages) | {1})
    groups = {}
    for v in range(tree.node_count):
        t = tree.stage[v]
        anchor_stage = max(a for a in adaptive if a <= t)
        anchor = tree.ancestor_at_stage(v, anchor_stage)
        groups.setdefault((t, anchor), []).append(v)
    return [sorted(g) for g in groups.values()]


def add_partially_adaptive_rows(model: ModelIR, tree: ScenarioTree, stages, prefix="pa:"):
    xblock, coord_lists = strategic_block_of(model, tree)
    seq = 0
    for group in partially_adaptive_groups(tree, stages):
        rep = group[0]
        for v in group[1:]:
            for coord in coord_lists[tree.stage[v]]:
                seq += 1
                model.add_constraint(
                    f"{prefix}eq:{seq}",
                    [(xblock[v][coord], 1.0), (xblock[rep][coord], -1.0)],
                    "=",
                    0.0,
                )
    return model


def partially_adaptive(tree: ScenarioTree, stages) -> ModelIR:
    """Model fragment with x variables equated per partially adaptive group."""
    model, _, _ = _fresh(tree, "partially_adaptive")
    return add_partially_adaptive_rows(model, tree, stages)


# -- hypercube objective on a strategic block ---------------------------------------


def hypercube_base_model(inst) -> ModelIR:
    """x block plus the hypercube objective (maximize c . x)."""
    tree = inst.tree
    model = ModelIR("hypercube")
    add_strategic_block(model, tree)
    xblock, _ = strategic_block_of(model, tree)
    terms = []
    for v in range(tree.node_count):
        multi = tree.strategic_dim[tree.stage[v]] > 1
        for i, coef in enumerate(inst.c[v]):
            coord = str(i) if multi else None
            if coef:
                terms.append((xblock[v][coord], float(coef)))
    model.set_objective(MAX, terms)
    return model
