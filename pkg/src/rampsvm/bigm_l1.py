"""L1-norm big-M tightening.

Pipeline: hinge-model heuristic for a global upper bound, distance-based
initial M, one of two weight-bound LP sweeps (per-coordinate pair caps or a
single aggregate cap), intercept bounds, Lagrangian per-coordinate bounds
from the relaxation duals, and three flavors of per-instance M updates.
An improvement-driven outer loop repeats the dual-based phases until the
bounds stop moving.
"""

import csv
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import data as datamod
from . import model, report, solver
from .problems import OPTIMAL, UNBOUNDED, SolverFailure

EPS_POS = 1e-7     # slope guard: a non-positive Lagrangian slope gives no bound
EPS_IMPR = 1e-6    # relative per-component improvement that keeps the loop alive
MAX_OUTER = 20
INF = float("inf")


class BoundsStateL1:
    """Everything the L1 strategies know so far about one instance.

    All updates go through min/max with the stored value, so every field is
    monotone by construction: M and the upper bounds only tighten, the b
    interval only shrinks.
    """

    def __init__(self, ds, C):
        self.C = float(C)
        self.UB_global = INF
        self.incumbent = None
        self.M = None
        self.M_initial = None
        self.UBw_pair = np.full(ds.d, INF)
        self.UB_w = INF
        self.UBw_plus = np.full(ds.d, INF)
        self.UBw_minus = np.full(ds.d, INF)
        self.b_lb = -INF
        self.b_ub = INF
        self.skipped = []
        self.log = []

    def config(self, include_b=True):
        """Snapshot as a model configuration with every installed bound."""
        pair = self.UBw_pair if np.any(np.isfinite(self.UBw_pair)) else None
        return model.RampLossModel(
            model.L1, self.C, self.M,
            wplus_ub=self.UBw_plus, wminus_ub=self.UBw_minus,
            b_lb=self.b_lb if include_b else -INF,
            b_ub=self.b_ub if include_b else INF,
            pair_ub=pair)

    def metric_components(self):
        width = self.b_ub - self.b_lb if np.isfinite(self.b_ub) and \
            np.isfinite(self.b_lb) else INF
        return np.concatenate([
            self.M, self.UBw_pair, self.UBw_plus, self.UBw_minus,
            [self.UB_w, width]])


def _improved(before, after):
    """Progress test on the sum of M values and bound widths. A component
    turning finite counts; otherwise the finite sum must drop by a relative
    EPS_IMPR. Every component is individually monotone, so comparing sums
    over the components finite on both sides is sound."""
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


def write_phase_log(state, path):
    cols = ["phase", "iteration", "wall_time", "m_improvement", "bound_width"]
    with open(path, "w", newline="") as fh:
        out = csv.DictWriter(fh, fieldnames=cols)
        out.writeheader()
        out.writerows(state.log)


def initial_upper_bound(ds, C):
    """Hinge solve, truncate, re-solve on the kept instances. The second
    point is never worse; both are valid, so take the better one."""
    svm = solver.solve(model.build_svm(ds, model.L1, C))
    if svm.status != OPTIMAL:
        raise SolverFailure(f"hinge model came back {svm.status}")
    seed = model.feasible_from_svm(svm, ds, model.L1, C)
    improved = improved_point(ds, model.L1, C, seed.z)
    best = improved if improved.objective <= seed.objective else seed
    return best.objective, best


def improved_point(ds, norm, C, ztilde):
    sol = solver.solve(model.restricted_svm(ds, norm, C, ztilde))
    if sol.status != OPTIMAL:
        raise SolverFailure(f"restricted hinge model came back {sol.status}")
    layout = model.Layout(ds.n, ds.d, norm, with_z=False)
    x = np.asarray(sol.primal)
    return model.FeasiblePoint(norm, C, layout.weights(x), x[layout.b],
                               x[layout.xi_cols], ztilde)


def initial_bigM(ds, UB_global):
    return np.array([
        datamod.same_class_max_distance(ds, i, "LINF") * UB_global
        for i in range(ds.n)])


def _family_with_cut(ds, state, include_b=True):
    cfg = state.config(include_b)
    layout = model.Layout(ds.n, ds.d, model.L1)
    fam = solver.LPFamily(model.build_relaxation(ds, cfg), reserve_rows=1)
    fam.add_row(model.ub_cut_row(layout, state.C, state.UB_global))
    return fam, layout


def _batch(ds, state, objectives, sense, jobs, include_b=True):
    """Optimal values for many objectives over the cut region, in order.

    Returns (status, value) pairs. jobs > 1 splits the list over worker
    processes, each with its own warm family; the reduce order is fixed, so
    results do not depend on the worker count.
    """
    objectives = [np.asarray(c, dtype=float) for c in objectives]
    if not jobs or jobs <= 1 or len(objectives) < 4:
        fam, _ = _family_with_cut(ds, state, include_b)
        out = []
        for c in objectives:
            sol = fam.solve_objective(c, sense)
            out.append((sol.status, sol.objective))
        return out
    cfg = state.config(include_b)
    layout = model.Layout(ds.n, ds.d, model.L1)
    problem = model.build_relaxation(ds, cfg)
    cut = model.ub_cut_row(layout, state.C, state.UB_global)
    chunks = np.array_split(np.arange(len(objectives)), jobs)
    args = [(problem, [cut], [objectives[j] for j in chunk], sense)
            for chunk in chunks if chunk.size]
    out = []
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        for part in pool.map(_batch_worker, args):
            out.extend(part)
    return out


def _batch_worker(args):
    problem, cuts, objectives, sense = args
    fam = solver.LPFamily(problem, reserve_rows=len(cuts))
    for row in cuts:
        fam.add_row(row)
    out = []
    for c in objectives:
        sol = fam.solve_objective(np.asarray(c), sense)
        out.append((sol.status, sol.objective))
    return out


def tighten_w_variant1(ds, state, jobs=None):
    """Per-coordinate caps on w_k+ + w_k-, then the distance-based M update
    using the largest cap."""
    layout = model.Layout(ds.n, ds.d, model.L1)
    objectives = []
    for k in range(ds.d):
        c = np.zeros(layout.size)
        c[layout.wp(k)] = 1.0
        c[layout.wm(k)] = 1.0
        objectives.append(c)
    for k, (status, val) in enumerate(_batch(ds, state, objectives, "max",
                                             jobs)):
        if status == OPTIMAL:
            state.UBw_pair[k] = min(state.UBw_pair[k], val)
        elif status != UNBOUNDED:
            raise SolverFailure(f"pair-bound subproblem {k} came back {status}")
    cap = float(np.max(state.UBw_pair))
    for i in range(ds.n):
        via_pair = datamod.same_class_max_distance(ds, i, "L1") * cap
        via_global = datamod.same_class_max_distance(ds, i, "LINF") \
            * state.UB_global
        state.M[i] = min(state.M[i], via_pair, via_global)
    return state.UBw_pair, state.M


def tighten_w_variant2(ds, state, jobs=None):
    """One aggregate LP caps the full split-weight sum; the cap is then
    installed as a per-coordinate row on each w_k+ + w_k-."""
    layout = model.Layout(ds.n, ds.d, model.L1)
    c = np.zeros(layout.size)
    c[layout.wp_cols] = 1.0
    c[layout.wm_cols] = 1.0
    (status, val), = _batch(ds, state, [c], "max", jobs)
    if status == OPTIMAL:
        state.UB_w = min(state.UB_w, val)
    elif status != UNBOUNDED:
        raise SolverFailure(f"aggregate-bound subproblem came back {status}")
    if np.isfinite(state.UB_w):
        state.UBw_pair = np.minimum(state.UBw_pair, state.UB_w)
        for i in range(ds.n):
            state.M[i] = min(
                state.M[i],
                datamod.same_class_max_distance(ds, i, "LINF") * state.UB_w)
    return state.UB_w, state.M


def b_bounds(ds, state):
    """Extreme intercept values over the current cut region. The fresh
    interval is intersected with the stored one, so it never widens."""
    fam, layout = _family_with_cut(ds, state, include_b=False)
    c = np.zeros(layout.size)
    c[layout.b] = 1.0
    hi = fam.solve_objective(c, "max")
    lo = fam.solve_objective(c, "min")
    for side, sol in (("upper", hi), ("lower", lo)):
        if sol.status not in (OPTIMAL, UNBOUNDED):
            raise SolverFailure(f"b {side} bound came back {sol.status}")
    if hi.status == OPTIMAL:
        state.b_ub = min(state.b_ub, hi.objective)
    if lo.status == OPTIMAL:
        state.b_lb = max(state.b_lb, lo.objective)
    return state.b_lb, state.b_ub


def lagrangian_w_bounds(ds, state):
    """Coordinate upper bounds from one relaxation solve.

    Re-centering any coordinate at its relaxation optimum is an exact affine
    change of variables, so the shifted problems used by the bound formula
    all share this solve's objective value and margin duals; nothing else
    needs to be solved. Slopes below EPS_POS give no information and are
    recorded as skipped.
    """
    relax = model.build_relaxation(ds, state.config())
    sol = solver.solve_lp(relax)
    if sol.status != OPTIMAL:
        raise SolverFailure(f"relaxation came back {sol.status}")
    layout = model.Layout(ds.n, ds.d, model.L1)
    Z = sol.objective
    margin_rows = relax.rows_tagged("margin")
    alpha = np.array([sol.duals[j] for j in margin_rows])
    slope = ds.X.T @ (alpha * ds.y)
    x = np.asarray(sol.primal)
    gap = max(state.UB_global - Z, 0.0)
    for k in range(ds.d):
        den = 1.0 - slope[k]
        if den > EPS_POS:
            state.UBw_plus[k] = min(state.UBw_plus[k],
                                    gap / den + x[layout.wp(k)])
        else:
            state.skipped.append((k, "+"))
        den = 1.0 + slope[k]
        if den > EPS_POS:
            state.UBw_minus[k] = min(state.UBw_minus[k],
                                     gap / den + x[layout.wm(k)])
        else:
            state.skipped.append((k, "-"))
    return sol


def _instance_objective(ds, layout, i):
    c = np.zeros(layout.size)
    c[layout.wp_cols] = -ds.y[i] * ds.X[i]
    c[layout.wm_cols] = ds.y[i] * ds.X[i]
    c[layout.b] = -ds.y[i]
    c[layout.xi(i)] = -1.0
    return c


def _group_objective(ds, layout, cls, idx):
    """Aggregated margin objective for one same-class group.

    Multi-member groups use the coordinate extremes; a single-member group
    keeps its own slack term, which is the tighter valid choice and makes a
    singleton group's update coincide with the per-instance one.
    """
    idx = np.asarray(idx)
    if idx.size == 1:
        return _instance_objective(ds, layout, int(idx[0]))
    lo = ds.X[idx].min(axis=0)
    hi = ds.X[idx].max(axis=0)
    c = np.zeros(layout.size)
    if cls > 0:
        c[layout.wp_cols] = -lo
        c[layout.wm_cols] = hi
        c[layout.b] = -1.0
    else:
        c[layout.wp_cols] = hi
        c[layout.wm_cols] = -lo
        c[layout.b] = 1.0
    return c


def _equalize_duplicates(ds, M):
    groups = {}
    for i in range(ds.n):
        groups.setdefault((ds.X[i].tobytes(), float(ds.y[i])), []).append(i)
    for idx in groups.values():
        if len(idx) > 1:
            M[idx] = min(M[j] for j in idx)


def update_M_variantI(ds, state, jobs=None):
    layout = model.Layout(ds.n, ds.d, model.L1)
    objectives = [_instance_objective(ds, layout, i) for i in range(ds.n)]
    for i, (status, val) in enumerate(_batch(ds, state, objectives, "max",
                                             jobs)):
        if status == OPTIMAL:
            state.M[i] = min(state.M[i], 1.0 + val)
        elif status != UNBOUNDED:
            raise SolverFailure(f"M subproblem {i} came back {status}")
    _equalize_duplicates(ds, state.M)
    return state.M


def update_M_variantII(ds, state, jobs=None):
    layout = model.Layout(ds.n, ds.d, model.L1)
    classes = [(cls, np.flatnonzero(ds.y == cls)) for cls in (1.0, -1.0)]
    classes = [(cls, idx) for cls, idx in classes if idx.size]
    objectives = [_group_objective(ds, layout, cls, idx)
                  for cls, idx in classes]
    for (cls, idx), (status, val) in zip(
            classes, _batch(ds, state, objectives, "max", jobs)):
        if status == OPTIMAL:
            state.M[idx] = np.minimum(state.M[idx], 1.0 + val)
        elif status != UNBOUNDED:
            raise SolverFailure(f"class-M subproblem came back {status}")
    return state.M


def update_M_variantIII(ds, state, clusters, jobs=None):
    layout = model.Layout(ds.n, ds.d, model.L1)
    pos_groups, neg_groups = clusters
    work = [(1.0, np.asarray(idx)) for idx in pos_groups]
    work += [(-1.0, np.asarray(idx)) for idx in neg_groups]
    objectives = [_group_objective(ds, layout, cls, idx) for cls, idx in work]
    for (cls, idx), (status, val) in zip(
            work, _batch(ds, state, objectives, "max", jobs)):
        if status == OPTIMAL:
            state.M[idx] = np.minimum(state.M[idx], 1.0 + val)
        elif status != UNBOUNDED:
            raise SolverFailure(f"cluster-M subproblem came back {status}")
    _equalize_duplicates(ds, state.M)
    return state.M


def run_algorithm2(ds, C, variant_w=2, variant_M="I", cluster_cfg=None,
                   rerun_w_lps=False, jobs=None):
    """Full L1 strategy. Returns (model config, state, summary dict)."""
    if variant_w not in (1, 2):
        raise ValueError("variant_w must be 1 or 2")
    if variant_M not in ("I", "II", "III"):
        raise ValueError("variant_M must be I, II, or III")
    t0 = time.perf_counter()
    state = BoundsStateL1(ds, C)
    state.UB_global, state.incumbent = initial_upper_bound(ds, C)
    state.M_initial = initial_bigM(ds, state.UB_global)
    state.M = state.M_initial.copy()
    _log(state, "init", 0, t0)

    tighten = tighten_w_variant1 if variant_w == 1 else tighten_w_variant2
    tighten(ds, state, jobs)
    _log(state, f"w_variant{variant_w}", 0, t0)
    b_bounds(ds, state)
    _log(state, "b_bounds", 0, t0)

    t_cluster = 0.0
    clusters = None
    if variant_M == "III":
        from . import cluster as clustermod
        cfg = cluster_cfg or clustermod.ClusterConfig()
        tc = time.perf_counter()
        clusters = clustermod.cluster_per_class(
            ds, cfg.fraction, cfg.algo, cfg.seed)
        t_cluster = time.perf_counter() - tc

    iterations = 0
    for it in range(1, MAX_OUTER + 1):
        iterations = it
        before = state.metric_components()
        lagrangian_w_bounds(ds, state)
        b_bounds(ds, state)
        if rerun_w_lps:
            tighten(ds, state, jobs)
        if variant_M == "I":
            update_M_variantI(ds, state, jobs)
        elif variant_M == "II":
            update_M_variantII(ds, state, jobs)
        else:
            update_M_variantIII(ds, state, clusters, jobs)
        _log(state, "loop", it, t0)
        if not _improved(before, state.metric_components()):
            break

    summary = {
        "iterations": iterations,
        "t_cluster": t_cluster,
        "t_strategy": time.perf_counter() - t0,
        "m_improvement": report.m_improvement(state.M_initial, state.M),
    }
    return state.config(), state, summary
