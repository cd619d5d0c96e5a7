"""krevise command line: generation, checking, building, solving, experiments.

Thin wrappers over the library; every subcommand can emit machine-readable
JSON (schema 1) with --json.  Exit codes: 0 success, 1 domain error
(infeasible or invalid input), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import formulations as F
from .experiments import ExperimentSpec, run_experiment
from .hypercube import (
    instance_from_dict,
    instance_to_dict,
    random_instance,
    solve_bruteforce,
    solve_dp,
    split_instance,
)
from .model import parse_mps, write_lp, write_mps
from .problems import (
    airport_capacity_table,
    attach_revision,
    build_base_model,
    capacity_planning_to_dict,
    generate_capacity_planning,
    generate_lot_sizing,
    lot_sizing_to_dict,
    saghp_ingest,
    saghp_instance_from_weather,
    saghp_to_dict,
)
from .revision import (
    GuardError,
    PolicyError,
    is_k_revisable,
    max_inconsistency,
    min_revisability,
)
from .solver import MipOptions, SolverError, default_solver, solve_lp
from .tree import (
    GenerationError,
    TreeError,
    generate_btree,
    generate_stree,
    load_tree,
    save_tree,
    tree_from_dict,
)

SCHEMA = 1

_DOMAIN_ERRORS = (TreeError, GenerationError, PolicyError, GuardError, SolverError, ValueError,
                  KeyError, FileNotFoundError)


def _emit(args, payload, text):
    if getattr(args, "json", False):
        payload = {"schema": SCHEMA, **payload}
        print(json.dumps(payload, indent=1, default=str))
    else:
        print(text)


def _load_json(path):
    with open(path) as fh:
        return json.load(fh)


def cmd_gen_tree(args):
    if args.kind == "btree":
        tree = generate_btree(args.T)
    else:
        tree = generate_stree(args.nodes, args.T, m=args.m, rho=args.rho,
                              tolerance=args.tol, seed=args.seed)
    save_tree(tree, args.out)
    _emit(args, {"nodes": tree.node_count, "T": tree.T, "out": args.out},
          f"wrote {args.kind} with {tree.node_count} nodes (T={tree.T}) to {args.out}")
    return 0


def cmd_gen_instance(args):
    if args.kind in ("hc", "ls", "tp") and not args.tree:
        raise PolicyError(f"gen-instance --kind {args.kind} needs --tree")
    if args.kind == "saghp" and not args.flights:
        raise PolicyError("gen-instance --kind saghp needs --flights")
    tree = load_tree(args.tree) if args.tree else None
    if args.kind == "hc":
        data = instance_to_dict(random_instance(tree, seed=args.seed))
        data["kind"] = "hypercube"
    elif args.kind == "ls":
        data = lot_sizing_to_dict(generate_lot_sizing(tree, seed=args.seed))
    elif args.kind == "tp":
        data = capacity_planning_to_dict(generate_capacity_planning(
            tree, seed=args.seed, n_tools=args.tools, n_ops=args.ops, n_products=args.products))
    else:  # saghp builds its own weather tree
        flights = saghp_ingest(args.flights)
        capacities = airport_capacity_table(args.airport)
        inst = saghp_instance_from_weather(flights, args.pattern, args.T, capacities)
        data = saghp_to_dict(inst)
    with open(args.out, "w") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")
    _emit(args, {"kind": args.kind, "out": args.out}, f"wrote {args.kind} instance to {args.out}")
    return 0


def cmd_check(args):
    tree = load_tree(args.tree)
    policy = _load_json(args.policy)
    x = [0.0] * tree.node_count
    for key, val in policy["x"].items():
        x[int(key)] = float(val)
    revisable = is_k_revisable(tree, x, args.K)
    min_k = min_revisability(tree, x)
    delta, witness = max_inconsistency(tree, x, args.K)
    payload = {
        "revisable": revisable,
        "min_revisability": min_k,
        "delta": delta,
        "witness": witness.to_jsonable() if witness is not None else None,
    }
    _emit(args, payload, json.dumps(payload))
    return 0


def cmd_solve_hc(args):
    inst = instance_from_dict(_load_json(args.instance))
    flat, _ = split_instance(inst)
    if args.bruteforce:
        value = solve_bruteforce(flat, args.K)
        payload = {"value": value, "method": "bruteforce"}
    else:
        value, x, _ = solve_dp(flat, args.K)
        payload = {"value": value, "method": "dp", "x": x}
    _emit(args, payload, f"HC_{args.K} = {payload['value']}")
    return 0


def cmd_build(args):
    if not args.base and not args.tree:
        raise PolicyError("build needs --tree or --base")
    if args.base:
        data = _load_json(args.base)
        model = build_base_model(data)
        tree = tree_from_dict(data["tree"])
        attach_revision(model, tree,
                        F.RevisionFormulationSpec(args.formulation, args.K, args.vector_mode))
    else:
        tree = load_tree(args.tree)
        model = F.build(args.formulation, tree, args.K, vector_mode=args.vector_mode)
    text = write_lp(model) if args.out.endswith(".lp") else write_mps(model)
    with open(args.out, "w") as fh:
        fh.write(text)
    stats = model.stats()
    _emit(args, {"out": args.out, **stats},
          f"wrote {args.formulation} model to {args.out} ({stats['variables']} vars, "
          f"{stats['constraints']} rows)")
    return 0


def cmd_export(args):
    with open(args.model) as fh:
        model = parse_mps(fh.read())
    text = write_mps(model) if args.format == "mps" else write_lp(model)
    with open(args.out, "w") as fh:
        fh.write(text)
    _emit(args, {"out": args.out, "format": args.format}, f"wrote {args.format} to {args.out}")
    return 0


def cmd_solve(args):
    with open(args.model) as fh:
        model = parse_mps(fh.read())
    if args.lp:
        for var in model.variables:
            var.kind = "continuous"
    opts = MipOptions(time_limit=args.time_limit, node_cap=args.node_limit)
    res = (solve_lp(model) if args.lp
           else default_solver(model, opts, keep_artifacts=args.keep_artifacts))
    payload = {"status": res.status, "objective": res.objective, "bound": res.bound,
               "nodes": res.nodes, "iterations": res.iterations}
    if args.solution and res.assignment:
        with open(args.solution, "w") as fh:
            for name, val in res.assignment.items():
                fh.write(f"{name} {val:.12g}\n")
        payload["solution"] = args.solution
    _emit(args, payload, f"{res.status}: objective {res.objective} (bound {res.bound})")
    return 0 if res.status in ("optimal", "limit") else 1


def cmd_experiment(args):
    spec = ExperimentSpec.from_dict(_load_json(args.spec))
    report = run_experiment(spec, out_path=args.out)
    _emit(args, {"rows": len(report.rows), "out": args.out},
          f"wrote {len(report.rows)} rows to {args.out}")
    return 0


def make_parser():
    parser = argparse.ArgumentParser(prog="krevise",
                                     description="K-revision multistage stochastic programming")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=lambda **kw:
                                argparse.ArgumentParser(parents=[common], **kw))

    p = sub.add_parser("gen-tree", help="generate a scenario tree")
    p.add_argument("--kind", choices=["btree", "stree"], required=True)
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--nodes", type=int, default=50)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--tol", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_tree)

    p = sub.add_parser("gen-instance", help="generate a problem instance")
    p.add_argument("--kind", choices=["hc", "ls", "tp", "saghp"], required=True)
    p.add_argument("--tree", help="tree JSON (hc/ls/tp)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tools", type=int, default=10)
    p.add_argument("--ops", type=int, default=50)
    p.add_argument("--products", type=int, default=10)
    p.add_argument("--flights", help="CSV of flights (saghp)")
    p.add_argument("--pattern", default="VIV", help="weather pattern (saghp)")
    p.add_argument("--T", type=int, default=8, help="stages (saghp)")
    p.add_argument("--airport", default="SFO")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_instance)

    p = sub.add_parser("check", help="check K-revisability of a policy")
    p.add_argument("--tree", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--K", type=int, required=True)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("solve-hc", help="solve a hypercube instance exactly")
    p.add_argument("--instance", required=True)
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--bruteforce", action="store_true")
    p.set_defaults(func=cmd_solve_hc)

    p = sub.add_parser("build", help="build a model file")
    p.add_argument("--formulation", choices=list(F.FORMULATION_KINDS), required=True)
    p.add_argument("--tree", help="tree JSON (hypercube feasibility model)")
    p.add_argument("--base", help="instance JSON to attach the revision constraint to")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--vector-mode", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("export", help="convert a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--format", choices=["mps", "lp"], required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("solve", help="solve a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--lp", action="store_true", help="solve the LP relaxation")
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--node-limit", type=int, default=1_000_000)
    p.add_argument("--solution", help="write the solution here (name value lines)")
    p.add_argument("--keep-artifacts", action="store_true",
                   help="retain MPS/solution temp files from an external solve")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("experiment", help="run an experiment spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
