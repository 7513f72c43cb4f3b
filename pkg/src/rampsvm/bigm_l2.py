"""L2-norm big-M tightening.

Mirrors the L1 pipeline with the quadratic twists: the global bound comes
from hinge QP solves, the weight box starts at +-sqrt(2 UB), the incumbent
objective becomes a quadratic cap on every bound subproblem, and the
Lagrangian step boxes each coordinate through one convex relaxation solve.
The per-instance update has a median-filtered variant that only reworks the
largest M entries.

Bound subproblems run through the structured interior point in region_qp.
The cap is inflated by a hair before it goes there: when the relaxation is
already tight at the incumbent the true region thins to a point (or goes
empty within solver noise), and no interior method can walk it. Solving
over the inflated superset keeps every derived bound valid and costs an
error orders of magnitude below the acceptance tolerances.
"""

import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import data as datamod
from . import model, region_qp, report, solver
from .problems import OPTIMAL, UNBOUNDED, SolverFailure

EPS_IMPR = 1e-6
MAX_OUTER = 20
# relative inflation of the objective cap, and one-sided padding applied to
# every bound read off a subproblem value; both keep bounds valid against
# the solver's own residual tolerance. the padding scales with the residual
# the solve actually achieved (a task stopped at a degenerate floor has a
# wider duality gap than a fully converged one), with PAD_FACTOR of slack
# over the gap estimate
CAP_PAD = 1e-6
VAL_PAD = 1e-9
PAD_FACTOR = 100.0
# when the relaxation value closes to within this fraction of the incumbent
# the loop stops: the incumbent is (near-)optimal, the remaining tightening
# is marginal, and the cap region is approaching the relaxation's optimal
# face, which no interior method can walk once it collapses
DEGEN_TOL = 1e-2
INF = float("inf")


class BoundsStateL2:
    """Monotone bound store for one L2 run: big-M vector, weight box, and
    intercept interval only ever shrink."""

    def __init__(self, ds, C):
        self.C = float(C)
        self.UB_global = INF
        self.incumbent = None
        self.M = None
        self.M_initial = None
        self.w_lb = np.full(ds.d, -INF)
        self.w_ub = np.full(ds.d, INF)
        self.b_lb = -INF
        self.b_ub = INF
        self.clamped = []
        self.log = []

    def config(self, include_b=True, with_valid_ineq=True):
        return model.RampLossModel(
            model.L2, self.C, self.M,
            w_lb=self.w_lb, w_ub=self.w_ub,
            b_lb=self.b_lb if include_b else -INF,
            b_ub=self.b_ub if include_b else INF,
            use_valid_ineq=with_valid_ineq)

    def metric_components(self):
        widths = self.w_ub - self.w_lb
        b_width = self.b_ub - self.b_lb if np.isfinite(self.b_ub) and \
            np.isfinite(self.b_lb) else INF
        return np.concatenate([self.M, widths, [b_width]])


def _improved(before, after):
    finite_before = np.isfinite(before)
    if np.any(finite_before < np.isfinite(after)):
        return True
    old = float(before[finite_before].sum())
    new = float(after[finite_before].sum())
    return old - new > EPS_IMPR * max(1.0, abs(old))


def _log(state, phase, iteration, t0):
    impr = 0.0
    if state.M_initial is not None:
        impr = report.m_improvement(state.M_initial, state.M)
    comp = state.metric_components()
    state.log.append({
        "phase": phase, "iteration": iteration,
        "wall_time": time.perf_counter() - t0,
        "m_improvement": impr,
        "bound_width": float(np.sum(comp[np.isfinite(comp)])),
    })


def initial_upper_bound_l2(ds, C):
    svm = solver.solve(model.build_svm(ds, model.L2, C))
    if svm.status != OPTIMAL:
        raise SolverFailure(f"hinge model came back {svm.status}")
    seed = model.feasible_from_svm(svm, ds, model.L2, C)
    from .bigm_l1 import improved_point
    improved = improved_point(ds, model.L2, C, seed.z)
    best = improved if improved.objective <= seed.objective else seed
    return best.objective, best


def initial_bigM_l2(ds, UB_global):
    reach = np.sqrt(2.0 * UB_global)
    return np.array([
        datamod.same_class_max_distance(ds, i, "L2") * reach
        for i in range(ds.n)])


def _pad_up(val, err=0.0):
    return val + max(VAL_PAD, PAD_FACTOR * err) * (1.0 + abs(val))


def _pad_down(val, err=0.0):
    return val - max(VAL_PAD, PAD_FACTOR * err) * (1.0 + abs(val))


def _region_spec(ds, state, include_b=True, extended=False):
    cap = state.UB_global + CAP_PAD * (1.0 + abs(state.UB_global))
    v_ub = None
    if extended:
        v_ub = np.maximum(np.abs(state.w_lb), np.abs(state.w_ub))
    return region_qp.RegionSpec(
        ds.X, ds.y, state.M, state.C,
        w_lb=state.w_lb, w_ub=state.w_ub,
        b_lb=state.b_lb if include_b else -INF,
        b_ub=state.b_ub if include_b else INF,
        cap_rhs=cap, v_ub=v_ub)


def _batch_worker(args):
    spec, tasks = args
    return [(r["status"], r["objective"], r["err"])
            for r in region_qp.solve_batch(spec, tasks)]


def _batch_region(ds, state, tasks, jobs, include_b=True, extended=False):
    """(status, value) pairs for (coeffs, sense) tasks over the cap region,
    order-stable under any worker count."""
    spec = _region_spec(ds, state, include_b, extended)
    if not jobs or jobs <= 1 or len(tasks) < 4:
        return _batch_worker((spec, tasks))
    chunks = np.array_split(np.arange(len(tasks)), jobs)
    args = [(spec, [tasks[j] for j in chunk])
            for chunk in chunks if chunk.size]
    out = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for part in pool.map(_batch_worker, args):
            out.extend(part)
    return out


def tighten_w_box(ds, state, jobs=None):
    """Extreme value of every weight coordinate over the cap region; the
    box is the intersection with the previous one."""
    spec = _region_spec(ds, state)
    tasks = []
    for k in range(ds.d):
        c = np.zeros(spec.nv)
        c[k] = 1.0
        tasks.append((c, "max"))
        tasks.append((c, "min"))
    results = _batch_region(ds, state, tasks, jobs)
    for k in range(ds.d):
        status, val, err = results[2 * k]
        if status == OPTIMAL:
            state.w_ub[k] = min(state.w_ub[k], _pad_up(val, err))
        elif status != UNBOUNDED:
            raise SolverFailure(f"w box max {k} came back {status}")
        status, val, err = results[2 * k + 1]
        if status == OPTIMAL:
            state.w_lb[k] = max(state.w_lb[k], _pad_down(val, err))
        elif status != UNBOUNDED:
            raise SolverFailure(f"w box min {k} came back {status}")
    return state.w_lb, state.w_ub


def b_bounds_l2(ds, state, jobs=None):
    spec = _region_spec(ds, state, include_b=False)
    c = np.zeros(spec.nv)
    c[spec.ib] = 1.0
    (s_hi, v_hi, e_hi), (s_lo, v_lo, e_lo) = _batch_region(
        ds, state, [(c, "max"), (c, "min")], jobs, include_b=False)
    for side, status in (("upper", s_hi), ("lower", s_lo)):
        if status not in (OPTIMAL, UNBOUNDED):
            raise SolverFailure(f"b {side} bound came back {status}")
    if s_hi == OPTIMAL:
        state.b_ub = min(state.b_ub, _pad_up(v_hi, e_hi))
    if s_lo == OPTIMAL:
        state.b_lb = max(state.b_lb, _pad_down(v_lo, e_lo))
    return state.b_lb, state.b_ub


def lagrangian_w_box(ds, state):
    """Coordinate box from one solve of the convex relaxation (slack-link
    rows in, weight box out, intercept interval in).

    Re-centering a coordinate at its relaxation optimum is exact, so the
    relaxation's objective and margin duals give, for every coordinate at
    once, an interval certified to contain that coordinate in any solution
    at least as good as the global bound.
    """
    spec = region_qp.RegionSpec(
        ds.X, ds.y, state.M, state.C,
        b_lb=state.b_lb, b_ub=state.b_ub,
        sigma=1.0, valid_ineq=True)
    c = np.zeros(spec.nv)
    c[spec.ixi] = state.C
    c[spec.iz] = 2.0 * state.C
    sol = region_qp.solve_one(spec, c, "min")
    if sol["status"] != OPTIMAL:
        raise SolverFailure(f"relaxation came back {sol['status']}")
    pad = max(VAL_PAD, PAD_FACTOR * sol["err"])
    # push the relaxation value down by the solve's own error so the
    # objective slack entering the radius is an over-estimate
    Z = sol["objective"] - pad * (1.0 + abs(sol["objective"]))
    alpha = sol["alpha"]
    center = ds.X.T @ (alpha * ds.y)
    wtil = sol["x"][spec.iw]
    slack = state.UB_global - Z
    if slack < 0.0:
        state.clamped.append(float(slack))
    radicand = (wtil - center) ** 2 + 2.0 * max(slack, 0.0)
    spread = np.sqrt(radicand)
    spread += pad * (1.0 + np.abs(center) + spread)
    state.w_lb = np.maximum(state.w_lb, center - spread)
    state.w_ub = np.minimum(state.w_ub, center + spread)
    return sol


def _instance_task(ds, spec, i):
    c = np.zeros(spec.nv)
    c[spec.iw] = -ds.y[i] * ds.X[i]
    c[spec.ib] = -ds.y[i]
    c[spec.ixi.start + i] = -1.0
    return (c, "max")


def update_M_variantI_l2(ds, state, jobs=None, only=None):
    spec = _region_spec(ds, state)
    idx = np.arange(ds.n) if only is None else np.asarray(only)
    tasks = [_instance_task(ds, spec, int(i)) for i in idx]
    results = _batch_region(ds, state, tasks, jobs)
    for i, (status, val, err) in zip(idx, results):
        if status == OPTIMAL:
            state.M[i] = min(state.M[i], 1.0 + _pad_up(val, err))
        elif status != UNBOUNDED:
            raise SolverFailure(f"M subproblem {i} came back {status}")
    from .bigm_l1 import _equalize_duplicates
    _equalize_duplicates(ds, state.M)
    return state.M


def update_M_above_median_l2(ds, state, jobs=None):
    """Per-instance update restricted to entries above the median M."""
    cutoff = float(np.median(state.M))
    only = np.flatnonzero(state.M > cutoff)
    if only.size == 0:
        return state.M
    return update_M_variantI_l2(ds, state, jobs, only=only)


def _group_task(ds, spec, cls, idx):
    absx = np.abs(ds.X[np.asarray(idx)]).max(axis=0)
    c = np.zeros(spec.nv)
    c[spec.iv] = absx
    c[spec.ib] = -1.0 if cls > 0 else 1.0
    return (c, "max")


def update_M_clustered_l2(ds, state, groups, jobs=None):
    """Grouped update: one magnitude subproblem per same-class group, its
    value applied to every member. Whole classes are the two-group case."""
    spec = _region_spec(ds, state, extended=True)
    pos_groups, neg_groups = groups
    work = [(1.0, np.asarray(idx)) for idx in pos_groups]
    work += [(-1.0, np.asarray(idx)) for idx in neg_groups]
    tasks = [_group_task(ds, spec, cls, idx) for cls, idx in work]
    results = _batch_region(ds, state, tasks, jobs, extended=True)
    for (cls, idx), (status, val, err) in zip(work, results):
        if status == OPTIMAL:
            state.M[idx] = np.minimum(state.M[idx], 1.0 + _pad_up(val, err))
        elif status != UNBOUNDED:
            raise SolverFailure(f"group-M subproblem came back {status}")
    from .bigm_l1 import _equalize_duplicates
    _equalize_duplicates(ds, state.M)
    return state.M


def _class_groups(ds):
    pos = [np.flatnonzero(ds.y == 1.0)]
    neg = [np.flatnonzero(ds.y == -1.0)]
    return ([g for g in pos if g.size], [g for g in neg if g.size])


def run_algorithm3(ds, C, variant="I", cluster_cfg=None, jobs=None):
    """Full L2 strategy. Returns (model config, state, summary dict)."""
    if variant not in ("I", "I_v2", "II", "III"):
        raise ValueError("variant must be I, I_v2, II, or III")
    t0 = time.perf_counter()
    state = BoundsStateL2(ds, C)
    state.UB_global, state.incumbent = initial_upper_bound_l2(ds, C)
    state.M_initial = initial_bigM_l2(ds, state.UB_global)
    state.M = state.M_initial.copy()
    reach = np.sqrt(2.0 * state.UB_global)
    state.w_lb = np.full(ds.d, -reach)
    state.w_ub = np.full(ds.d, reach)
    _log(state, "init", 0, t0)

    t_cluster = 0.0
    groups = None
    if variant == "III":
        from . import cluster as clustermod
        cfg = cluster_cfg or clustermod.ClusterConfig()
        tc = time.perf_counter()
        groups = clustermod.cluster_per_class(
            ds, cfg.fraction, cfg.algo, cfg.seed)
        t_cluster = time.perf_counter() - tc
    elif variant == "II":
        groups = _class_groups(ds)

    def degenerate(Z):
        return state.UB_global - Z <= \
            DEGEN_TOL * (1.0 + abs(state.UB_global))

    # the relaxation solve is cheap and safe (no cap), so run it first: it
    # seeds the weight box and says whether the cap region has any room
    relax = lagrangian_w_box(ds, state)
    _log(state, "relax", 0, t0)
    iterations = 0
    stopped = None
    while stopped is None and iterations < MAX_OUTER:
        # the relaxation value only rises as bounds shrink, so a stale Z
        # makes this check conservative, never premature
        if degenerate(relax["objective"]):
            stopped = "incumbent matches relaxation value"
            break
        iterations += 1
        before = state.metric_components()
        try:
            tighten_w_box(ds, state, jobs)
            b_bounds_l2(ds, state, jobs)
            relax = lagrangian_w_box(ds, state)
            if degenerate(relax["objective"]):
                stopped = "incumbent matches relaxation value"
                _log(state, "loop", iterations, t0)
                break
            if variant == "I":
                update_M_variantI_l2(ds, state, jobs)
            elif variant == "I_v2":
                update_M_above_median_l2(ds, state, jobs)
            else:
                update_M_clustered_l2(ds, state, groups, jobs)
        except SolverFailure as exc:
            # bounds only ever shrink, so whatever tightening landed before
            # the stall is valid; stop here instead of giving up the run
            stopped = f"subproblem solver stalled: {exc}"
            _log(state, "loop", iterations, t0)
            break
        _log(state, "loop", iterations, t0)
        if not _improved(before, state.metric_components()):
            break

    summary = {
        "iterations": iterations,
        "t_cluster": t_cluster,
        "t_strategy": time.perf_counter() - t0,
        "m_improvement": report.m_improvement(state.M_initial, state.M),
        "stopped": stopped,
    }
    return state.config(), state, summary
