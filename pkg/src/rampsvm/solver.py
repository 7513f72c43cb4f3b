"""Public solve/certify entry points over the simplex and interior-point cores.

Dual conventions are documented in problems.py: duals always refer to the
problem in its stated sense, so a maximization gets the negated multipliers
of the internal minimization actually performed.
"""

import time

import numpy as np

from . import ipm
from .problems import (EQ, FAILED, GE, INFEASIBLE, LE, OPTIMAL, UNBOUNDED,
                       Constraint, ConvexProblem, Solution, SolverFailure)
from .simplex import SimplexCore


def _region_arrays(problem):
    A, rel, b = problem.rows()
    lb, ub = problem.bounds_arrays()
    return A, rel, b, lb, ub


def _as_solution(problem, raw, sense_sign, t0):
    elapsed = time.perf_counter() - t0
    if raw["status"] == "infeasible":
        return Solution(status=INFEASIBLE, primal=None, objective=None,
                        duals=None, solve_time=elapsed)
    if raw["status"] == "unbounded":
        ray = raw.get("ray")
        return Solution(status=UNBOUNDED, primal=None, objective=None,
                        duals=None, solve_time=elapsed, ray=ray)
    obj = sense_sign * raw["obj"] + problem.objective_constant
    duals = None if raw["y"] is None else sense_sign * raw["y"]
    rc = None if raw["rc"] is None else sense_sign * raw["rc"]
    return Solution(status=OPTIMAL, primal=raw["x"], objective=obj,
                    duals=duals, solve_time=elapsed, reduced_costs=rc)


def solve_lp(problem):
    if not problem.is_lp():
        raise ValueError("problem has a quadratic objective, use solve_qp")
    t0 = time.perf_counter()
    A, rel, b, lb, ub = _region_arrays(problem)
    sign = 1.0 if problem.sense == "min" else -1.0
    core = SimplexCore(A, rel, b, lb, ub)
    raw = core.solve(sign * np.asarray(problem.linear_cost, dtype=float))
    return _as_solution(problem, raw, sign, t0)


def solve_qp(problem):
    if problem.sense != "min":
        raise ValueError("quadratic objectives are only supported for min")
    t0 = time.perf_counter()
    A, rel, b, lb, ub = _region_arrays(problem)
    raw = ipm.solve_qp_core(np.asarray(problem.quadratic_diag, dtype=float),
                            np.asarray(problem.linear_cost, dtype=float),
                            A, rel, b, lb, ub)
    return _as_solution(problem, raw, 1.0, t0)


def solve(problem):
    return solve_lp(problem) if problem.is_lp() else solve_qp(problem)


class LPFamily:
    """One feasible region, many objectives, warm-started in between.

    The core keeps its basis across resolve calls, so the n-th objective of
    a tightening sweep costs a handful of pivots instead of a fresh phase 1.
    Results are memoized on the objective vector: structurally identical
    subproblems get bitwise identical answers.
    """

    def __init__(self, problem, reserve_rows=0):
        if not problem.is_lp():
            raise ValueError("LPFamily is for linear objectives")
        self.problem = problem
        A, rel, b, lb, ub = _region_arrays(problem)
        self.core = SimplexCore(A, rel, b, lb, ub, reserve_rows=reserve_rows)
        self._memo = {}
        self._extra_rows = []

    def solve_objective(self, coeffs, sense="min", light=False):
        coeffs = np.asarray(coeffs, dtype=float)
        key = (sense, coeffs.tobytes())
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        sign = 1.0 if sense == "min" else -1.0
        t0 = time.perf_counter()
        run = self.core.solve_light if light else self.core.solve
        raw = run(sign * coeffs)
        shell = ConvexProblem(sense=sense, linear_cost=coeffs,
                              constraints=self.problem.constraints,
                              variable_bounds=self.problem.variable_bounds,
                              objective_constant=self.problem.objective_constant)
        sol = _as_solution(shell, raw, sign, t0)
        if not light:
            self._memo[key] = sol
        return sol

    def add_row(self, constraint):
        self.core.append_row(np.asarray(constraint.coeffs, dtype=float),
                             constraint.rel, constraint.rhs)
        self._extra_rows.append(constraint)
        self._memo.clear()

    @property
    def num_extra_rows(self):
        return len(self._extra_rows)


class QuadraticCutRegion:
    """Linear objectives over an LP region plus one convex quadratic cap.

    The cap 0.5 x'Dx + g'x <= rhs is enforced by tangent cuts generated on
    demand. Cuts are placed where the segment from an interior anchor to the
    offending LP optimum crosses the cap surface, so each one supports the
    true region instead of floating far outside it; that keeps the cut count
    small. Every intermediate answer is an outer bound (maxima come out too
    high, minima too low), which is exactly the safe direction for big-M
    work, so even a non-converged answer is usable. `converged` on the
    returned record says whether the final iterate met the cap to tolerance.
    """

    CUT_CAP = 200

    def __init__(self, problem, quad_diag, quad_linear, quad_rhs,
                 seed_points=(), reserve_rows=None, viol_tol=1e-7):
        reserve = 2 * self.CUT_CAP + 8 if reserve_rows is None else \
            reserve_rows
        self.family = LPFamily(problem, reserve_rows=reserve)
        self.D = np.asarray(quad_diag, dtype=float)
        self.g = np.asarray(quad_linear, dtype=float)
        self.rhs = float(quad_rhs)
        self.viol_tol = float(viol_tol)
        self.pool = []
        # the origin strictly satisfies the cap whenever rhs > 0, which
        # holds for objective caps; anchor there for the surface search
        self.anchor = np.zeros(self.D.size)
        for point in seed_points:
            self._install(np.asarray(point, dtype=float))

    def _install(self, xbar):
        coeffs = self.D * xbar + self.g
        cut_rhs = self.rhs + 0.5 * float(np.dot(self.D * xbar, xbar))
        self.family.add_row(Constraint(coeffs, LE, cut_rhs, tag="quadcut"))
        self.pool.append(xbar)

    def _cap_violation(self, x):
        val = 0.5 * float(np.dot(self.D * x, x)) + float(np.dot(self.g, x))
        return val - self.rhs

    def _surface_point(self, x):
        """Where [anchor, x] crosses the cap surface; x itself if the
        anchor gives no usable crossing."""
        delta = x - self.anchor
        a = 0.5 * float(np.dot(self.D * delta, delta))
        b = float(np.dot(self.D * self.anchor + self.g, delta))
        c = self._cap_violation(self.anchor)
        if a <= 0.0 or c >= 0.0:
            return x
        t = (-b + np.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)
        if not 0.0 < t < 1.0:
            return x
        return self.anchor + t * delta

    def _cut_at(self, x):
        surface = self._surface_point(x)
        self._install(surface)
        if not np.array_equal(surface, x):
            self._install(x)

    def solve_objective(self, coeffs, sense="max"):
        """Cut until the cap holds, then return a certified LP solution.

        Intermediate rounds use the light solve (no fresh factors, no duals);
        the light iterate only decides where the next tangent goes, so its
        accuracy cannot leak into the answer.
        """
        span = self.viol_tol * (1.0 + abs(self.rhs))
        rounds = 0
        while rounds < self.CUT_CAP:
            sol = self.family.solve_objective(coeffs, sense, light=True)
            if sol.status != OPTIMAL:
                sol.converged = False
                return sol
            x = np.asarray(sol.primal)
            if self._cap_violation(x) > span:
                self._cut_at(x)
                rounds += 1
                continue
            cert = self.family.solve_objective(coeffs, sense)
            if cert.status != OPTIMAL:
                cert.converged = False
                return cert
            if self._cap_violation(np.asarray(cert.primal)) <= span:
                cert.converged = True
                return cert
            # certified polish landed on an alternate vertex past the cap
            self._cut_at(np.asarray(cert.primal))
            rounds += 1
        sol = self.family.solve_objective(coeffs, sense)
        sol.converged = False
        return sol


def certify(problem, solution, tol=1e-7):
    """Independent optimality check from first principles.

    Verifies primal feasibility, dual sign conventions, stationarity of the
    Lagrangian, complementary slackness, and the primal-dual objective gap.
    Returns a list of violation strings, empty when the certificate holds.
    """
    bad = []
    if solution.status != OPTIMAL:
        return [f"status is {solution.status}, nothing to certify"]
    x = np.asarray(solution.primal, dtype=float)
    y = np.asarray(solution.duals, dtype=float)
    c = np.asarray(problem.linear_cost, dtype=float)
    lb, ub = problem.bounds_arrays()
    sign = 1.0 if problem.sense == "min" else -1.0

    grad = c.copy()
    if problem.quadratic_diag is not None:
        grad = grad + np.asarray(problem.quadratic_diag) * x

    rows = problem.constraints
    scale = 1.0 + float(np.max(np.abs(c))) if c.size else 1.0
    for j, row in enumerate(rows):
        ax = float(np.dot(row.coeffs, x))
        span = tol * (1.0 + abs(row.rhs))
        if row.rel == GE and ax < row.rhs - span:
            bad.append(f"row {j} ({row.tag}) violated: {ax} < {row.rhs}")
        elif row.rel == LE and ax > row.rhs + span:
            bad.append(f"row {j} ({row.tag}) violated: {ax} > {row.rhs}")
        elif row.rel == EQ and abs(ax - row.rhs) > span:
            bad.append(f"row {j} ({row.tag}) not tight: {ax} != {row.rhs}")
        yj = sign * y[j]
        if row.rel == GE and yj < -tol * scale:
            bad.append(f"row {j} dual sign: {y[j]}")
        if row.rel == LE and yj > tol * scale:
            bad.append(f"row {j} dual sign: {y[j]}")
        slack = ax - row.rhs
        if abs(y[j]) * abs(slack) > tol * scale * (1.0 + abs(row.rhs)):
            bad.append(f"row {j} complementary slackness: y={y[j]} slack={slack}")

    r = grad.copy()
    for j, row in enumerate(rows):
        r -= y[j] * np.asarray(row.coeffs, dtype=float)
    r *= sign   # reduced costs in min convention
    for v in range(x.size):
        span = tol * scale * (1.0 + abs(float(x[v])))
        at_lb = np.isfinite(lb[v]) and x[v] <= lb[v] + tol * (1 + abs(lb[v]))
        at_ub = np.isfinite(ub[v]) and x[v] >= ub[v] - tol * (1 + abs(ub[v]))
        if x[v] < lb[v] - tol * (1 + abs(lb[v])):
            bad.append(f"var {v} below lower bound")
        if x[v] > ub[v] + tol * (1 + abs(ub[v])):
            bad.append(f"var {v} above upper bound")
        if at_lb and at_ub:
            continue
        if at_lb:
            if r[v] < -span:
                bad.append(f"var {v} at lower bound with reduced cost {r[v]}")
        elif at_ub:
            if r[v] > span:
                bad.append(f"var {v} at upper bound with reduced cost {r[v]}")
        elif abs(r[v]) > span:
            bad.append(f"var {v} interior with reduced cost {r[v]}")

    # primal-dual gap; bound multipliers are the signed parts of r
    dual_val = sum(y[j] * row.rhs for j, row in enumerate(rows))
    for v in range(x.size):
        rv = sign * r[v]
        if rv > 0 and np.isfinite(lb[v]):
            dual_val += rv * lb[v]
        elif rv < 0 and np.isfinite(ub[v]):
            dual_val += rv * ub[v]
    if problem.quadratic_diag is not None:
        dual_val -= 0.5 * float(np.dot(np.asarray(problem.quadratic_diag) * x, x))
    primal_val = problem.objective_value(x)
    gap = abs(primal_val - (dual_val + problem.objective_constant))
    if gap > tol * (1.0 + abs(primal_val)) * 100:
        bad.append(f"duality gap {gap}")
    return bad
