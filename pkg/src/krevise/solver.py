"""Embedded LP/MIP solving plus a subprocess bridge to external solvers.

The LP engine is a dense two-phase primal simplex with general variable
bounds: Dantzig pricing with a Bland fallback against cycling, explicit
basis-inverse updates with periodic refactorization.  It always returns a
basic (vertex) solution, which is what the LP-integrality checks rely on.
The MIP engine is best-first branch and bound on top of it.  Neither aims
to compete with commercial solvers; they are deterministic and auditable
at desk scale.  `external_solve` shells out to any solver reachable via a
command template and verifies the returned solution against the model.
"""

from __future__ import annotations

import math
import os
import shlex
import subprocess
import tempfile
import time
from dataclasses import dataclass
from heapq import heappush, heappop

import numpy as np

from .model import INF, MAX, ModelIR, evaluate, write_mps

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
LIMIT = "limit"

_FEAS_TOL = 1e-8
_OPT_TOL = 1e-7
_INT_TOL = 1e-6


class SolverError(RuntimeError):
    pass


class SimplexNumericalError(SolverError):
    """Singular basis or irrecoverable numerical trouble."""


class SolverSpawnError(SolverError):
    pass


class SolverExitError(SolverError):
    pass


class SolutionParseError(SolverError):
    pass


class SolutionVerificationError(SolverError):
    pass


@dataclass
class SolveResult:
    status: str
    objective: float
    assignment: dict
    bound: float
    iterations: int = 0
    nodes: int = 0
    wall_time: float = 0.0

    def value(self, name):
        return self.assignment[name]


# -- bounded-variable primal simplex ------------------------------------------


class _Simplex:
    """min c.x  s.t.  A x = b,  lo <= x <= hi  (dense, two-phase)."""

    def __init__(self, A, b, c, lo, hi, iteration_cap=50000, refactor_every=150):
        self.A = np.asarray(A, dtype=float)
        self.b = np.asarray(b, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.m, self.n = self.A.shape
        self.iteration_cap = iteration_cap
        self.refactor_every = refactor_every
        self.iterations = 0

    def _refactor(self):
        B = self.A[:, self.basis]
        try:
            self.binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise SimplexNumericalError("singular basis during refactorization")

    def _basic_values(self):
        rhs = self.b - self.A @ self.x + self.A[:, self.basis] @ self.x[self.basis]
        return self.binv @ rhs

    def solve(self):
        m, n = self.m, self.n
        A, b = self.A, self.b
        # start nonbasic at the finite bound closest to zero (0 for free vars)
        x = np.where(np.isfinite(self.lo), self.lo, 0.0)
        use_hi = np.isfinite(self.hi) & (~np.isfinite(self.lo) | (np.abs(self.hi) < np.abs(self.lo)))
        x[use_hi] = self.hi[use_hi]
        x[~np.isfinite(x)] = 0.0
        resid = b - A @ x
        # one artificial per row carries the initial residual
        art_sign = np.where(resid >= 0, 1.0, -1.0)
        self.A = np.hstack([A, np.diag(art_sign)])
        self.lo = np.concatenate([self.lo, np.zeros(m)])
        self.hi = np.concatenate([self.hi, np.full(m, INF)])
        self.x = np.concatenate([x, np.abs(resid)])
        self.basis = list(range(n, n + m))
        self.at_upper = np.zeros(n + m, dtype=bool)
        fin_hi = np.isfinite(self.hi[:n])
        self.at_upper[:n] = fin_hi & (self.x[:n] == self.hi[:n]) & (self.x[:n] != self.lo[:n])
        self._refactor()

        phase1 = np.concatenate([np.zeros(n), np.ones(m)])
        status = self._iterate(phase1)
        if status == LIMIT:
            return LIMIT
        if float(phase1 @ self.x) > 1e-6:
            return INFEASIBLE
        # freeze artificials at zero so they cannot re-enter
        self.x[n:] = np.minimum(self.x[n:], 0.0)
        self.lo[n:] = 0.0
        self.hi[n:] = 0.0
        self.x[n:] = 0.0
        phase2 = np.concatenate([self.c, np.zeros(m)])
        return self._iterate(phase2)

    def _iterate(self, cost):
        n_total = self.A.shape[1]
        m = self.m
        basic_mask = np.zeros(n_total, dtype=bool)
        basic_mask[self.basis] = True
        fixed = self.lo == self.hi
        free = ~np.isfinite(self.lo) & ~np.isfinite(self.hi)
        stall = 0
        bland_after = 4 * (m + n_total) + 200
        while True:
            if self.iterations >= self.iteration_cap:
                return LIMIT
            self.iterations += 1
            if self.iterations % self.refactor_every == 0:
                self._refactor()
                self.x[self.basis] = self._basic_values()
            y = cost[self.basis] @ self.binv
            d = cost - y @ self.A
            # improvement rate: at-upper columns decrease, at-lower increase,
            # free columns move whichever way their reduced cost rewards
            score = np.where(self.at_upper, d, -d)
            score[free] = np.abs(d[free])
            score[basic_mask | fixed] = -INF
            if stall > bland_after:
                eligible = np.nonzero(score > _OPT_TOL)[0]
                if eligible.size == 0:
                    return OPTIMAL
                enter = int(eligible[0])
            else:
                enter = int(np.argmax(score))
                if score[enter] <= _OPT_TOL:
                    return OPTIMAL
            if free[enter]:
                direction = 1.0 if d[enter] < 0 else -1.0
            else:
                direction = -1.0 if self.at_upper[enter] else 1.0
            w = self.binv @ self.A[:, enter]
            # largest step before a basic variable or the entering bound blocks
            if m:
                basic_idx = np.asarray(self.basis)
                rate = -direction * w
                xb = self.x[basic_idx]
                room = np.full(m, INF)
                pos = rate > 1e-11
                neg = rate < -1e-11
                with np.errstate(invalid="ignore"):
                    room[pos] = (self.hi[basic_idx[pos]] - xb[pos]) / rate[pos]
                    room[neg] = (self.lo[basic_idx[neg]] - xb[neg]) / rate[neg]
                room = np.maximum(room, 0.0)
                min_room = float(room.min())
            else:
                min_room = INF
            span = self.hi[enter] - self.lo[enter]
            if span <= min_room + 1e-12:
                if not np.isfinite(span):
                    return UNBOUNDED
                # bound flip, basis unchanged
                step = span * direction
                self.x[enter] += step
                if m:
                    self.x[basic_idx] -= step * w
                self.at_upper[enter] = not self.at_upper[enter]
                stall = stall + 1 if span < 1e-11 else 0
                continue
            if not np.isfinite(min_room):
                return UNBOUNDED
            candidates = np.nonzero(room <= min_room + 1e-12)[0]
            leave = int(min(candidates, key=lambda i: self.basis[i]))
            leave_to_upper = rate[leave] > 0
            step = min_room * direction
            self.x[enter] += step
            self.x[basic_idx] -= step * w
            out = self.basis[leave]
            basic_mask[out] = False
            basic_mask[enter] = True
            self.x[out] = self.hi[out] if leave_to_upper else self.lo[out]
            self.at_upper[out] = leave_to_upper
            self.at_upper[enter] = False
            self.basis[leave] = enter
            piv = w[leave]
            if abs(piv) < 1e-10:
                self._refactor()
            else:
                row = self.binv[leave, :] / piv
                self.binv -= np.outer(w, row)
                self.binv[leave, :] = row
            stall = stall + 1 if min_room < 1e-11 else 0


def _model_arrays(model: ModelIR, bound_patch=None):
    n = len(model.variables)
    m = len(model.constraints)
    lo = np.array([v.lower for v in model.variables], dtype=float)
    hi = np.array([v.upper for v in model.variables], dtype=float)
    if bound_patch:
        for idx, (L, U) in bound_patch.items():
            lo[idx] = max(lo[idx], L)
            hi[idx] = min(hi[idx], U)
    nslack = m
    A = np.zeros((m, n + nslack))
    b = np.zeros(m)
    slo = np.zeros(nslack)
    shi = np.zeros(nslack)
    for i, con in enumerate(model.constraints):
        for idx, coef in con.terms:
            A[i, idx] += coef
        b[i] = con.rhs
        A[i, n + i] = 1.0
        if con.sense == "<=":
            slo[i], shi[i] = 0.0, INF
        elif con.sense == ">=":
            slo[i], shi[i] = -INF, 0.0
        else:
            slo[i], shi[i] = 0.0, 0.0
    c = np.zeros(n + nslack)
    for idx, coef in model.objective:
        c[idx] += coef
    sign = -1.0 if model.objective_sense == MAX else 1.0
    return A, b, sign * c, np.concatenate([lo, slo]), np.concatenate([hi, shi]), sign


def solve_lp(model: ModelIR, iteration_cap=50000, bound_patch=None, var_cap=5000) -> SolveResult:
    """Solve the LP relaxation with the embedded simplex (vertex solution)."""
    if len(model.variables) > var_cap:
        raise SolverError(f"embedded LP guarded to {var_cap} variables")
    t0 = time.perf_counter()
    if any(v.lower > v.upper for v in model.variables) or (
        bound_patch and any(L > U + 1e-12 for L, U in bound_patch.values())
    ):
        return SolveResult(INFEASIBLE, math.nan, {}, _infeasible_bound(model), 0, 0, 0.0)
    A, b, c, lo, hi, sign = _model_arrays(model, bound_patch)
    if np.any(lo > hi + 1e-12):
        return SolveResult(INFEASIBLE, math.nan, {}, _infeasible_bound(model), 0, 0, 0.0)
    sx = _Simplex(A, b, c, lo, hi, iteration_cap=iteration_cap)
    status = sx.solve()
    wall = time.perf_counter() - t0
    if status == OPTIMAL:
        nvars = len(model.variables)
        values = sx.x[:nvars]
        assignment = {v.name: float(values[i]) for i, v in enumerate(model.variables)}
        obj = model.objective_value(values)
        return SolveResult(OPTIMAL, obj, assignment, obj, sx.iterations, 0, wall)
    if status == INFEASIBLE:
        return SolveResult(INFEASIBLE, math.nan, {}, _infeasible_bound(model), sx.iterations, 0, wall)
    if status == UNBOUNDED:
        ub = INF if model.objective_sense == MAX else -INF
        return SolveResult(UNBOUNDED, ub, {}, ub, sx.iterations, 0, wall)
    return SolveResult(LIMIT, math.nan, {}, _loose_bound(model), sx.iterations, 0, wall)


def _loose_bound(model):
    return INF if model.objective_sense == MAX else -INF


def _infeasible_bound(model):
    return -INF if model.objective_sense == MAX else INF


@dataclass
class MipOptions:
    node_cap: int = 1_000_000
    time_limit: float = None
    int_tol: float = _INT_TOL
    gap_abs: float = 1e-6
    lp_iteration_cap: int = 50000
    soft_integer_cap: int = 30  # informational; larger models are allowed but slow


def solve_mip(model: ModelIR, options: MipOptions = None) -> SolveResult:
    """Best-first branch and bound over the embedded LP.

    Branches on the most fractional integer variable (ties to the lowest
    index); optimal within gap_abs on the objective.  Deterministic.
    """
    opts = options or MipOptions()
    t0 = time.perf_counter()
    int_idx = model.integer_indices()
    sense_max = model.objective_sense == MAX

    def better(a, b):
        return a > b if sense_max else a < b

    root = solve_lp(model, iteration_cap=opts.lp_iteration_cap)
    iterations = root.iterations
    if root.status in (INFEASIBLE, UNBOUNDED):
        return SolveResult(root.status, root.objective, root.assignment, root.bound, iterations, 1,
                           time.perf_counter() - t0)
    if root.status == LIMIT:
        raise SolverError("LP iteration cap hit at the root relaxation")

    incumbent = None
    inc_obj = -INF if sense_max else INF
    counter = 0
    heap = []

    def push(bound, patch):
        nonlocal counter
        key = -bound if sense_max else bound
        heappush(heap, (key, counter, bound, patch))
        counter += 1

    def fractional(assignment):
        worst = None
        worst_dist = opts.int_tol
        for idx in int_idx:
            val = assignment[model.variables[idx].name]
            dist = abs(val - round(val))
            if dist > worst_dist + 1e-12:
                worst = idx
                worst_dist = dist
        return worst

    def consider(result, patch):
        nonlocal incumbent, inc_obj
        frac = fractional(result.assignment)
        if frac is None:
            if incumbent is None or better(result.objective, inc_obj):
                incumbent = dict(result.assignment)
                inc_obj = result.objective
            return None
        return frac

    frac = consider(root, {})
    nodes = 1
    if frac is not None:
        push(root.objective, ({}, frac, root.assignment[model.variables[frac].name]))

    status = OPTIMAL
    while heap:
        if nodes >= opts.node_cap:
            status = LIMIT
            break
        if opts.time_limit is not None and time.perf_counter() - t0 > opts.time_limit:
            status = LIMIT
            break
        key, _, bound, (patch, frac, val) = heappop(heap)
        if incumbent is not None and not better(bound, inc_obj + (opts.gap_abs if sense_max else -opts.gap_abs)):
            continue
        floor, ceil = math.floor(val + opts.int_tol), math.ceil(val - opts.int_tol)
        if floor == ceil:
            floor, ceil = math.floor(val), math.ceil(val)
        for lo_b, hi_b in (((-INF), floor), (ceil, INF)):
            child = dict(patch)
            cur = child.get(frac, (-INF, INF))
            child[frac] = (max(cur[0], lo_b), min(cur[1], hi_b))
            res = solve_lp(model, iteration_cap=opts.lp_iteration_cap, bound_patch=child)
            iterations += res.iterations
            nodes += 1
            if res.status == INFEASIBLE:
                continue
            if res.status != OPTIMAL:
                raise SolverError(f"unexpected LP status {res.status} inside branch and bound")
            if incumbent is not None and not better(res.objective, inc_obj):
                continue
            f2 = consider(res, child)
            if f2 is not None:
                push(res.objective, (child, f2, res.assignment[model.variables[f2].name]))

    open_bounds = [entry[2] for entry in heap]
    if status == LIMIT:
        best_open = (max if sense_max else min)(open_bounds) if open_bounds else inc_obj
        bound = best_open if incumbent is None else (max if sense_max else min)([best_open, inc_obj])
    else:
        bound = inc_obj
    wall = time.perf_counter() - t0
    if incumbent is None:
        if status == LIMIT:
            return SolveResult(LIMIT, math.nan, {}, bound, iterations, nodes, wall)
        return SolveResult(INFEASIBLE, math.nan, {}, _infeasible_bound(model), iterations, nodes, wall)
    return SolveResult(status, inc_obj, incumbent, bound, iterations, nodes, wall)


# -- external solver bridge ----------------------------------------------------

SOLVER_ENV = "KREVISE_SOLVER_CMD"


def parse_solution_file(text: str):
    """Parse 'name value' style solution files.

    Accepts plain name/value lines, '#' or '//' comment lines, header lines
    such as 'Objective value = ...', and the 4-column 'index name value
    reduced-cost' convention some solvers use.  Returns (assignment,
    objective-or-None).
    """
    assignment = {}
    objective = None
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith(("//",)):
            continue
        if line.startswith("#"):
            low = line.lower()
            if "objective" in low and "=" in line:
                try:
                    objective = float(line.split("=")[-1].strip())
                except ValueError:
                    pass
            continue
        low = line.lower()
        if low.startswith(("objective", "solution", "status", "optimal", "infeasible", "=obj=")):
            for tok in reversed(line.replace("=", " ").split()):
                try:
                    objective = float(tok)
                    break
                except ValueError:
                    continue
            continue
        tokens = line.split()
        try:
            if len(tokens) == 2:
                assignment[tokens[0]] = float(tokens[1])
            elif len(tokens) >= 3 and tokens[0].lstrip("-").isdigit():
                assignment[tokens[1]] = float(tokens[2])
            elif len(tokens) >= 3:
                assignment[tokens[0]] = float(tokens[1])
            else:
                raise ValueError
        except ValueError:
            raise SolutionParseError(f"cannot parse solution line: {raw!r}")
    if not assignment:
        raise SolutionParseError("solution file contains no variable values")
    return assignment, objective


def external_solve(model: ModelIR, solver_cmd=None, keep_artifacts=False, timeout=None,
                   verify_tol=1e-5) -> SolveResult:
    """Write MPS, invoke an external solver command, parse and verify.

    The command template must contain '{mps}' and '{sol}' placeholders,
    e.g. ``KREVISE_SOLVER_CMD='scip -f {mps} -l /dev/null -q -s /dev/null
    ...'`` or a small wrapper script.  Missing variables default to 0 (the
    usual convention for sparse solution files).
    """
    cmd = solver_cmd or os.environ.get(SOLVER_ENV)
    if not cmd:
        raise SolverSpawnError(
            f"no external solver configured; set {SOLVER_ENV} to a command template "
            "with {mps} and {sol} placeholders"
        )
    tmpdir = tempfile.mkdtemp(prefix="krevise_")
    mps_path = os.path.join(tmpdir, "model.mps")
    sol_path = os.path.join(tmpdir, "model.sol")
    with open(mps_path, "w") as fh:
        fh.write(write_mps(model))
    argv = [a.replace("{mps}", mps_path).replace("{sol}", sol_path) for a in shlex.split(cmd)]
    t0 = time.perf_counter()
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    except FileNotFoundError as exc:
        raise SolverSpawnError(
            f"cannot launch external solver {argv[0]!r}: {exc}; check that the binary is on PATH"
        ) from exc
    wall = time.perf_counter() - t0
    if proc.returncode != 0:
        raise SolverExitError(
            f"external solver exited with code {proc.returncode}; stderr: {proc.stderr[-500:]}"
        )
    if not os.path.exists(sol_path):
        raise SolutionParseError(f"external solver produced no solution file at {sol_path}")
    with open(sol_path) as fh:
        assignment, reported = parse_solution_file(fh.read())
    full = {v.name: assignment.get(v.name, 0.0) for v in model.variables}
    obj, violations = evaluate(model, full, tol=verify_tol)
    if violations:
        worst = max(violations, key=lambda kv: kv[1])
        raise SolutionVerificationError(
            f"external solution violates {len(violations)} rows; worst {worst[0]} by {worst[1]:.3g}"
        )
    if not keep_artifacts:
        for p in (mps_path, sol_path):
            try:
                os.unlink(p)
            except OSError:
                pass
        try:
            os.rmdir(tmpdir)
        except OSError:
            pass
    bound = reported if reported is not None else obj
    return SolveResult(OPTIMAL, obj, full, bound, 0, 0, wall)


def default_solver(model: ModelIR, options: MipOptions = None,
                   keep_artifacts=False) -> SolveResult:
    """External solver when configured, embedded branch and bound otherwise."""
    if os.environ.get(SOLVER_ENV):
        return external_solve(model, keep_artifacts=keep_artifacts)
    if model.integer_indices():
        return solve_mip(model, options)
    return solve_lp(model)
