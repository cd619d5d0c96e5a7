"""Base multistage problems: lot-sizing, capacity planning, and SAGHP.

Each builder emits a minimization ModelIR whose binary strategic block is
tagged "x:{node}" (or "x:{node}:{coord}"), with scenario probabilities
folded into the node objective coefficients.  `attach_revision` then
grafts any revision formulation onto that block.  Generators reproduce
the synthetic-instance recipes used for benchmarking.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass, field
from importlib import resources

from .formulations import RevisionFormulationSpec, add_revision_rows
from .model import BINARY, CONTINUOUS, INF, INTEGER, MIN, ModelIR
from .revision import PolicyError
from .tree import ScenarioTree


# -- uncapacitated lot-sizing ---------------------------------------------------


@dataclass(frozen=True)
class LotSizingInstance:
    tree: ScenarioTree
    demand: tuple
    setup_cost: tuple
    unit_cost: tuple
    holding_cost: tuple

    def __post_init__(self):
        n = self.tree.node_count
        for name in ("demand", "setup_cost", "unit_cost", "holding_cost"):
            vals = getattr(self, name)
            if len(vals) != n:
                raise PolicyError(f"{name} must have one entry per node")
            if any(v < 0 for v in vals):
                raise PolicyError(f"{name} entries must be nonnegative")


def generate_lot_sizing(tree: ScenarioTree, seed: int) -> LotSizingInstance:
    """Integer-grid costs: d in 100*U{1..10}, f in 1000*U{1..20},
    g in 40*U{1..5}, h in U{1..20}."""
    rng = random.Random(seed)
    n = tree.node_count
    return LotSizingInstance(
        tree,
        tuple(100.0 * rng.randint(1, 10) for _ in range(n)),
        tuple(1000.0 * rng.randint(1, 20) for _ in range(n)),
        tuple(40.0 * rng.randint(1, 5) for _ in range(n)),
        tuple(float(rng.randint(1, 20)) for _ in range(n)),
    )


def _remaining_demand_bound(tree, demand):
    """M_v: maximum cumulative demand from v to the end of the horizon."""
    M = [0.0] * tree.node_count
    for v in range(tree.node_count - 1, -1, -1):
        tail = max((M[u] for u in tree.children[v]), default=0.0)
        M[v] = demand[v] + tail
    return M


def build_lot_sizing(inst: LotSizingInstance) -> ModelIR:
    """Production indicator x, quantity q, end inventory s per node.

    Inventory balance runs at every node with zero inventory entering the
    root, so the root's demand must be produced there.  Production is
    capped by the remaining cumulative demand when switched on.
    """
    tree = inst.tree
    model = ModelIR("lot_sizing")
    M = _remaining_demand_bound(tree, inst.demand)
    x, q, s = {}, {}, {}
    obj = []
    for v in range(tree.node_count):
        w = tree.node_probability(v)
        x[v] = model.add_var(f"x_{v}", BINARY, tag=f"x:{v}")
        q[v] = model.add_var(f"q_{v}", CONTINUOUS, 0.0, INF, tag=f"q:{v}")
        s[v] = model.add_var(f"s_{v}", CONTINUOUS, 0.0, INF, tag=f"s:{v}")
        obj += [(x[v], w * inst.setup_cost[v]), (q[v], w * inst.unit_cost[v]),
                (s[v], w * inst.holding_cost[v])]
    for v in range(tree.node_count):
        terms = [(s[v], 1.0), (q[v], -1.0)]
        if v != 0:
            terms.append((s[tree.parent[v]], -1.0))
        model.add_constraint(f"balance:{v}", terms, "=", -inst.demand[v])
        model.add_constraint(f"setup:{v}", [(q[v], 1.0), (x[v], -M[v])], "<=", 0.0)
    model.set_objective(MIN, obj)
    return model


# -- capacity planning (tool planning) --------------------------------------------


@dataclass(frozen=True)
class CapacityPlanningInstance:
    """Tool planning data: N tools, O operations, P products.

    ``op_time[v]`` maps (tool, operation, product) to processing time for
    the pairs usable at node v; missing pairs carry the prohibitive
    INFEASIBLE_TIME.  ``tool_cap[i]`` (U_i) caps cumulative production of
    tool i and ``tool_rate[i]`` (V_i) is capacity per tool unit.
    """

    tree: ScenarioTree
    n_tools: int
    n_ops: int
    n_products: int
    setup_cost: tuple  # per node, length N
    unit_cost: tuple
    holding_cost: tuple
    shortage_cost: tuple  # per node, length P
    demand: tuple  # per node, length P
    op_time: tuple  # per node, dict (i, j, p) -> time
    tool_cap: tuple  # length N
    tool_rate: tuple  # length N

    INFEASIBLE_TIME = 1e8

    def required_ops(self, v, p):
        """Operations usable for product p at node v (some tool is feasible)."""
        ops = set()
        for (i, j, pp), tval in self.op_time[v].items():
            if pp == p and tval < self.INFEASIBLE_TIME:
                ops.add(j)
        return sorted(ops)


def generate_capacity_planning(tree: ScenarioTree, seed: int, n_tools=10, n_ops=50,
                               n_products=10, base_demand=1000.0, tool_cap=500.0,
                               tool_rate=100.0) -> CapacityPlanningInstance:
    """Benchmark recipe: stage-drifting LogNormal demand, cost scales 60/6/1,
    shortage penalty 10, per-(node, product) required operation and tool
    subsets, times U{1..10} on required pairs and 1e8 elsewhere."""
    rng = random.Random(seed)
    n = tree.node_count
    setup, unit, hold, short, dem, times = [], [], [], [], [], []
    for v in range(n):
        t = tree.stage[v]
        setup.append(tuple(60.0 * rng.randint(1, 5) for _ in range(n_tools)))
        unit.append(tuple(6.0 * rng.randint(1, 5) for _ in range(n_tools)))
        hold.append(tuple(1.0 * rng.randint(1, 5) for _ in range(n_tools)))
        short.append(tuple(10.0 for _ in range(n_products)))
        dem.append(tuple(rng.lognormvariate(1 + 0.5 * t, 0.5 + 0.1 * t) * base_demand
                         for _ in range(n_products)))
        tv = {}
        for p in range(n_products):
            eta = rng.randint(n_ops // 2, n_ops)
            req_ops = rng.sample(range(n_ops), eta)
            for j in req_ops:
                n_req_tools = rng.randint(1, n_tools)
                req_tools = rng.sample(range(n_tools), n_req_tools)
                for i in req_tools:
                    tv[(i, j, p)] = float(rng.randint(1, 10))
        times.append(tv)
    return CapacityPlanningInstance(
        tree, n_tools, n_ops, n_products,
        tuple(setup), tuple(unit), tuple(hold), tuple(short), tuple(dem), tuple(times),
        tuple(float(tool_cap) for _ in range(n_tools)),
        tuple(float(tool_rate) for _ in range(n_tools)),
    )


def build_capacity_planning(inst: CapacityPlanningInstance) -> ModelIR:
    """Seven row families: inventory balance, setup big-M, cumulative tool
    caps, demand coverage, operation routing, tool time capacity, and zero
    entering inventory at the root (folded into the root balance)."""
    tree = inst.tree
    N, P = inst.n_tools, inst.n_products
    model = ModelIR("capacity_planning")
    x, q, s, w, u = {}, {}, {}, {}, {}
    o = {}
    obj = []
    for v in range(tree.node_count):
        weight = tree.node_probability(v)
        for i in range(N):
            x[(v, i)] = model.add_var(f"x_{v}_{i}", BINARY, tag=f"x:{v}:{i}")
            q[(v, i)] = model.add_var(f"q_{v}_{i}", CONTINUOUS, 0.0, INF)
            s[(v, i)] = model.add_var(f"s_{v}_{i}", CONTINUOUS, 0.0, INF)
            obj += [(x[(v, i)], weight * inst.setup_cost[v][i]),
                    (q[(v, i)], weight * inst.unit_cost[v][i]),
                    (s[(v, i)], weight * inst.holding_cost[v][i])]
        for p in range(P):
            w[(v, p)] = model.add_var(f"w_{v}_{p}", CONTINUOUS, 0.0, INF)
            u[(v, p)] = model.add_var(f"u_{v}_{p}", CONTINUOUS, 0.0, INF)
            obj.append((u[(v, p)], weight * inst.shortage_cost[v][p]))
        for (i, j, p) in sorted(inst.op_time[v]):
            o[(v, i, j, p)] = model.add_var(f"o_{v}_{i}_{j}_{p}", CONTINUOUS, 0.0, INF)
    by_tool = {}
    for (v, i, j, p), idx in o.items():
        by_tool.setdefault((v, i), []).append((idx, inst.op_time[v][(i, j, p)]))
    for v in range(tree.node_count):
        for i in range(N):
            terms = [(s[(v, i)], 1.0), (q[(v, i)], -1.0)]
            if v != 0:
                terms.append((s[(tree.parent[v], i)], -1.0))
            model.add_constraint(f"balance:{v}:{i}", terms, "=", 0.0)
            model.add_constraint(f"setup:{v}:{i}",
                                 [(q[(v, i)], 1.0), (x[(v, i)], -inst.tool_cap[i])], "<=", 0.0)
            model.add_constraint(f"toolcap:{v}:{i}", [(s[(v, i)], 1.0)], "<=", inst.tool_cap[i])
            time_terms = list(by_tool.get((v, i), []))
            time_terms.append((s[(v, i)], -inst.tool_rate[i]))
            model.add_constraint(f"time:{v}:{i}", time_terms, "<=", 0.0)
        for p in range(P):
            model.add_constraint(f"demand:{v}:{p}",
                                 [(w[(v, p)], 1.0), (u[(v, p)], 1.0)], ">=", inst.demand[v][p])
            for j in inst.required_ops(v, p):
                route = [(o[(v, i, j, p)], 1.0) for i in range(N) if (v, i, j, p) in o]
                route.append((w[(v, p)], -1.0))
                model.add_constraint(f"route:{v}:{j}:{p}", route, ">=", 0.0)
    model.set_objective(MIN, obj)
    return model


# -- single airport ground holding ---------------------------------------------------


@dataclass(frozen=True)
class Flight:
    ident: str
    earliest_departure: int  # stage mu_f
    duration: int  # stages delta_f


@dataclass(frozen=True)
class SaghpInstance:
    tree: ScenarioTree
    flights: tuple
    ground_capacity: tuple  # C_g per node
    air_capacity: float  # C_a
    exempt: tuple  # E_t per stage, index 0 = stage 1
    ground_cost: float = 1.0
    air_cost: float = 3.0
    divert_cost: float = 300.0

    def departure_stages(self, flight: Flight):
        """Gamma_f: stages from which the flight can depart and still land."""
        return range(flight.earliest_departure, self.tree.T - flight.duration + 1)

    def __post_init__(self):
        for f in self.flights:
            if f.earliest_departure + f.duration > self.tree.T:
                raise PolicyError(
                    f"flight {f.ident} cannot land within the horizon "
                    f"(mu={f.earliest_departure}, delta={f.duration}, T={self.tree.T})"
                )
            if f.earliest_departure < 1 or f.duration < 1:
                raise PolicyError(f"flight {f.ident} has invalid schedule data")
        if len(self.ground_capacity) != self.tree.node_count:
            raise PolicyError("ground capacity must be given per node")
        if len(self.exempt) != self.tree.T:
            raise PolicyError("exempt counts must be given per stage")


WEATHER_CODES = ("V", "M", "I", "S")

_PLACEHOLDER_NOTE = "placeholder per-15-minute arrival capacities; not authoritative FAA data"


def airport_capacity_table(airport=None) -> dict:
    """Editable per-code arrival capacities shipped with the package."""
    with resources.files("krevise.data").joinpath("airport_capacity.json").open() as fh:
        table = json.load(fh)
    table.pop("_note", None)
    if airport is None:
        return table
    try:
        return table[airport]
    except KeyError:
        raise PolicyError(f"unknown airport {airport!r}; add it to airport_capacity.json") from None


def saghp_weather_tree(pattern, T: int):
    """Weather scenario tree for a condition-code evolution pattern.

    The root carries the first code.  Nodes at even stages get a single
    same-code child; nodes at odd stages additionally branch to the next
    code in the pattern, so codes persist for at least two stages.  All
    scenarios are equally likely.  Returns (tree, codes-per-node).
    """
    codes = list(pattern)
    if not codes or any(c not in WEATHER_CODES for c in codes):
        raise PolicyError(f"unknown code in weather pattern {pattern!r}")
    if T < 1:
        raise PolicyError("T must be >= 1")
    parents = [None]
    rank = [0]  # position within the pattern
    frontier = [0]
    for stage in range(1, T):
        nxt = []
        for v in frontier:
            parents.append(v)
            rank.append(rank[v])
            nxt.append(len(parents) - 1)
            if stage % 2 == 1 and rank[v] + 1 < len(codes):
                parents.append(v)
                rank.append(rank[v] + 1)
                nxt.append(len(parents) - 1)
        frontier = nxt
    with_children = set(parents[1:])
    leaves = [v for v in range(len(parents)) if v not in with_children]
    prob = {v: 1.0 / len(leaves) for v in leaves}
    tree = ScenarioTree(parents, leaf_prob=prob)
    node_codes = [codes[k] for k in rank]
    return tree, node_codes


def saghp_instance_from_weather(flights, pattern, T, capacity_by_code, air_capacity=None,
                                exempt=None, ground_cost=1.0, air_cost=3.0,
                                divert_cost=300.0) -> SaghpInstance:
    """Assemble an instance from a weather pattern and a code->capacity map.

    Code S forces zero arrival capacity.  The default air capacity is the
    visual-minus-instrument capacity gap.
    """
    tree, node_codes = saghp_weather_tree(pattern, T)
    cg = tuple(0.0 if c == "S" else float(capacity_by_code[c]) for c in node_codes)
    if air_capacity is None:
        air_capacity = float(capacity_by_code["V"]) - float(capacity_by_code["I"])
    ex = tuple(exempt) if exempt is not None else tuple(0.0 for _ in range(T))
    return SaghpInstance(tree, tuple(flights), cg, float(air_capacity), ex,
                         ground_cost, air_cost, divert_cost)


def saghp_ingest(path_or_lines) -> tuple:
    """Flights from CSV columns (flight_id, sched_departure_stage, duration_stages)."""
    if isinstance(path_or_lines, (str, bytes)) or hasattr(path_or_lines, "__fspath__"):
        fh = open(path_or_lines, newline="")
        close = True
    else:
        fh = path_or_lines
        close = False
    try:
        flights = []
        for row in csv.DictReader(fh):
            flights.append(Flight(row["flight_id"].strip(),
                                  int(row["sched_departure_stage"]),
                                  int(row["duration_stages"])))
        return tuple(flights)
    finally:
        if close:
            fh.close()


def build_saghp(inst: SaghpInstance) -> ModelIR:
    """Departure indicators per (node, flight), air-queue flow balance,
    capacity caps, and delay costs.

    x(v, f) exists when stage(v) is a feasible departure stage for f; each
    flight departs exactly once along every scenario.  Arrivals at node v
    are the departures at the stage-(tau(v) - delta_f) ancestor.
    """
    tree = inst.tree
    model = ModelIR("saghp")
    stage_flights = {t: [f for f in inst.flights if t in inst.departure_stages(f)]
                     for t in range(1, tree.T + 1)}
    x = {}
    obj = []
    for v in range(tree.node_count):
        weight = tree.node_probability(v)
        t = tree.stage[v]
        for f in stage_flights[t]:
            x[(v, f.ident)] = model.add_var(f"x_{v}_{f.ident}", BINARY, tag=f"x:{v}:{f.ident}")
            delay = inst.ground_cost * (t - f.earliest_departure)
            if delay:
                obj.append((x[(v, f.ident)], weight * delay))
    wq, land, div = {}, {}, {}
    for v in range(tree.node_count):
        weight = tree.node_probability(v)
        hi_w = 0.0 if v == 0 else inst.air_capacity
        wq[v] = model.add_var(f"w_{v}", INTEGER, 0.0, hi_w)
        land[v] = model.add_var(f"l_{v}", INTEGER, 0.0,
                                0.0 if v == 0 else inst.ground_capacity[v])
        div[v] = model.add_var(f"d_{v}", INTEGER, 0.0, INF)
        obj += [(wq[v], weight * inst.air_cost), (div[v], weight * inst.divert_cost)]
    for f in inst.flights:
        stages = list(inst.departure_stages(f))
        for sc in tree.scenarios():
            terms = [(x[(v, f.ident)], 1.0) for v in sc.path if tree.stage[v] in stages]
            if not terms:
                raise PolicyError(f"flight {f.ident} has no feasible departure stage")
            model.add_constraint(f"depart:{f.ident}:{sc.leaf}", terms, "=", 1.0)
    for v in range(tree.node_count):
        t = tree.stage[v]
        terms = [(land[v], 1.0), (wq[v], 1.0), (div[v], 1.0)]
        if v != 0:
            terms.append((wq[tree.parent[v]], -1.0))
        for f in inst.flights:
            if f.earliest_departure + f.duration <= t:
                dep = tree.ancestor_at_stage(v, t - f.duration)
                terms.append((x[(dep, f.ident)], -1.0))
        model.add_constraint(f"flow:{v}", terms, "=", float(inst.exempt[t - 1]))
    model.set_objective(MIN, obj)
    return model


# -- revision attachment ---------------------------------------------------------


def attach_revision(base: ModelIR, tree: ScenarioTree, spec: RevisionFormulationSpec) -> ModelIR:
    """Add the chosen K-revision formulation over base's tagged x block.

    The base model is extended in place (shared x variables, objective
    unchanged) and returned.
    """
    return add_revision_rows(base, tree, spec)


# -- instance serialization -------------------------------------------------------


def lot_sizing_to_dict(inst: LotSizingInstance) -> dict:
    from .tree import tree_to_dict

    return {
        "kind": "lot_sizing",
        "tree": tree_to_dict(inst.tree),
        "demand": list(inst.demand),
        "setup_cost": list(inst.setup_cost),
        "unit_cost": list(inst.unit_cost),
        "holding_cost": list(inst.holding_cost),
    }


def lot_sizing_from_dict(data: dict) -> LotSizingInstance:
    from .tree import tree_from_dict

    return LotSizingInstance(
        tree_from_dict(data["tree"]),
        tuple(data["demand"]),
        tuple(data["setup_cost"]),
        tuple(data["unit_cost"]),
        tuple(data["holding_cost"]),
    )


def capacity_planning_to_dict(inst: CapacityPlanningInstance) -> dict:
    from .tree import tree_to_dict

    return {
        "kind": "capacity_planning",
        "tree": tree_to_dict(inst.tree),
        "n_tools": inst.n_tools,
        "n_ops": inst.n_ops,
        "n_products": inst.n_products,
        "setup_cost": [list(row) for row in inst.setup_cost],
        "unit_cost": [list(row) for row in inst.unit_cost],
        "holding_cost": [list(row) for row in inst.holding_cost],
        "shortage_cost": [list(row) for row in inst.shortage_cost],
        "demand": [list(row) for row in inst.demand],
        "op_time": [{f"{i},{j},{p}": tv for (i, j, p), tv in sorted(row.items())}
                    for row in inst.op_time],
        "tool_cap": list(inst.tool_cap),
        "tool_rate": list(inst.tool_rate),
    }


def capacity_planning_from_dict(data: dict) -> CapacityPlanningInstance:
    from .tree import tree_from_dict

    op_time = []
    for row in data["op_time"]:
        parsed = {}
        for key, tv in row.items():
            i, j, p = (int(part) for part in key.split(","))
            parsed[(i, j, p)] = float(tv)
        op_time.append(parsed)
    return CapacityPlanningInstance(
        tree_from_dict(data["tree"]),
        int(data["n_tools"]), int(data["n_ops"]), int(data["n_products"]),
        tuple(tuple(row) for row in data["setup_cost"]),
        tuple(tuple(row) for row in data["unit_cost"]),
        tuple(tuple(row) for row in data["holding_cost"]),
        tuple(tuple(row) for row in data["shortage_cost"]),
        tuple(tuple(row) for row in data["demand"]),
        tuple(op_time),
        tuple(data["tool_cap"]),
        tuple(data["tool_rate"]),
    )


def saghp_to_dict(inst: SaghpInstance) -> dict:
    from .tree import tree_to_dict

    return {
        "kind": "saghp",
        "tree": tree_to_dict(inst.tree),
        "flights": [{"id": f.ident, "mu": f.earliest_departure, "delta": f.duration}
                    for f in inst.flights],
        "ground_capacity": list(inst.ground_capacity),
        "air_capacity": inst.air_capacity,
        "exempt": list(inst.exempt),
        "costs": {"ground": inst.ground_cost, "air": inst.air_cost, "divert": inst.divert_cost},
    }


def saghp_from_dict(data: dict) -> SaghpInstance:
    from .tree import tree_from_dict

    costs = data.get("costs", {})
    return SaghpInstance(
        tree_from_dict(data["tree"]),
        tuple(Flight(f["id"], int(f["mu"]), int(f["delta"])) for f in data["flights"]),
        tuple(data["ground_capacity"]),
        float(data["air_capacity"]),
        tuple(data["exempt"]),
        float(costs.get("ground", 1.0)),
        float(costs.get("air", 3.0)),
        float(costs.get("divert", 300.0)),
    )


def build_base_model(data: dict) -> ModelIR:
    """Dispatch an instance dict (with its 'kind' field) to its builder."""
    kind = data.get("kind")
    if kind == "lot_sizing":
        return build_lot_sizing(lot_sizing_from_dict(data))
    if kind == "capacity_planning":
        return build_capacity_planning(capacity_planning_from_dict(data))
    if kind == "saghp":
        return build_saghp(saghp_from_dict(data))
    if kind in (None, "hypercube"):
        from .formulations import hypercube_base_model
        from .hypercube import instance_from_dict

        return hypercube_base_model(instance_from_dict(data))
    raise PolicyError(f"unknown instance kind {kind!r}")
