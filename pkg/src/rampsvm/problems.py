"""Problem and solution containers shared by the LP and QP engines.

Dual sign convention. `Solution.duals` holds one multiplier per constraint
row for the Lagrangian L = obj + y'(rhs - Ax). In a minimization, >= rows
carry nonnegative multipliers and <= rows nonpositive ones; equality rows
are free. For a maximization the signs flip (the engine solves min of the
negated objective and negates the returned multipliers).
"""

import numpy as np

LE = "<="
GE = ">="
EQ = "="

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
FAILED = "Failed"


class SolverFailure(RuntimeError):
    """Numerical failure. Distinct from Infeasible/Unbounded, never silent."""


class Constraint:
    """One linear row: coeffs . x  (rel)  rhs, with a semantic tag.

    Tags identify rows by what they mean, e.g. ("margin", i) or ("ub_cut",),
    so the tightening code can address duals without tracking row numbers.
    """

    __slots__ = ("coeffs", "rel", "rhs", "tag")

    def __init__(self, coeffs, rel, rhs, tag=()):
        if rel not in (LE, GE, EQ):
            raise ValueError(f"bad relation {rel!r}")
        self.coeffs = np.asarray(coeffs, dtype=float)
        self.rel = rel
        self.rhs = float(rhs)
        self.tag = tuple(tag)


class ConvexProblem:
    """LP or diagonal convex QP in inequality form.

    min/max  0.5 * sum_j quadratic_diag[j] * x_j^2  +  linear_cost . x  + const
    subject to the constraint rows and per-variable bounds.
    """

    def __init__(self, sense, linear_cost, constraints, variable_bounds,
                 variable_names=None, quadratic_diag=None,
                 objective_constant=0.0, integer_mask=None):
        if sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        self.sense = sense
        self.linear_cost = np.asarray(linear_cost, dtype=float)
        m = self.linear_cost.size
        if quadratic_diag is None:
            quadratic_diag = np.zeros(m)
        self.quadratic_diag = np.asarray(quadratic_diag, dtype=float)
        if self.quadratic_diag.shape != (m,):
            raise ValueError("quadratic_diag length mismatch")
        if np.any(self.quadratic_diag < 0):
            raise ValueError("quadratic_diag must be nonnegative (convexity)")
        self.constraints = list(constraints)
        for con in self.constraints:
            if con.coeffs.shape != (m,):
                raise ValueError(
                    f"constraint {con.tag} has {con.coeffs.size} coefficients, "
                    f"expected {m}")
        self.variable_bounds = [(float(lo), float(hi))
                                for lo, hi in variable_bounds]
        if len(self.variable_bounds) != m:
            raise ValueError("variable_bounds length mismatch")
        for lo, hi in self.variable_bounds:
            if lo > hi:
                raise ValueError(f"empty bound interval [{lo}, {hi}]")
        self.variable_names = (list(variable_names) if variable_names
                               else [f"x{j}" for j in range(m)])
        if len(self.variable_names) != m:
            raise ValueError("variable_names length mismatch")
        self.objective_constant = float(objective_constant)
        self.integer_mask = (np.zeros(m, dtype=bool) if integer_mask is None
                             else np.asarray(integer_mask, dtype=bool))

    @property
    def num_vars(self):
        return self.linear_cost.size

    @property
    def num_rows(self):
        return len(self.constraints)

    def is_lp(self):
        return not np.any(self.quadratic_diag > 0)

    def rows(self):
        """Stack constraints into (A, rel list, rhs vector)."""
        if not self.constraints:
            A = np.zeros((0, self.num_vars))
            return A, [], np.zeros(0)
        A = np.vstack([c.coeffs for c in self.constraints])
        rel = [c.rel for c in self.constraints]
        rhs = np.array([c.rhs for c in self.constraints])
        return A, rel, rhs

    def rows_tagged(self, kind):
        """Row indices whose tag starts with `kind`, in row order."""
        return [j for j, c in enumerate(self.constraints)
                if c.tag and c.tag[0] == kind]

    def bounds_arrays(self):
        lb = np.array([lo for lo, _ in self.variable_bounds])
        ub = np.array([hi for _, hi in self.variable_bounds])
        return lb, ub

    def objective_value(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * np.dot(self.quadratic_diag * x, x)
                     + np.dot(self.linear_cost, x) + self.objective_constant)

    def with_bounds(self, overrides):
        """Copy with variable-bound overrides {index: (lb, ub)}."""
        bounds = list(self.variable_bounds)
        for j, bnd in overrides.items():
            bounds[j] = (float(bnd[0]), float(bnd[1]))
        clone = ConvexProblem.__new__(ConvexProblem)
        clone.sense = self.sense
        clone.linear_cost = self.linear_cost
        clone.quadratic_diag = self.quadratic_diag
        clone.constraints = self.constraints
        clone.variable_bounds = bounds
        clone.variable_names = self.variable_names
        clone.objective_constant = self.objective_constant
        clone.integer_mask = self.integer_mask
        return clone


class Solution:
    """Solver verdict: status plus primal/dual certificates when Optimal."""

    def __init__(self, status, primal=None, objective=None, duals=None,
                 solve_time=0.0, reduced_costs=None, ray=None, message=""):
        self.status = status
        self.primal = primal
        self.objective = objective
        self.duals = duals
        self.solve_time = solve_time
        self.reduced_costs = reduced_costs
        self.ray = ray
        self.message = message

    def __repr__(self):
        obj = "" if self.objective is None else f", obj={self.objective:.6g}"
        return f"Solution({self.status}{obj})"


def _fmt(v):
    return f"{v:.12g}"


def _term(coef, name, first):
    if coef == 0:
        return ""
    sign = "-" if coef < 0 else ("" if first else "+")
    mag = abs(coef)
    return f" {sign} {_fmt(mag)} {name}" if not first else f"{sign}{_fmt(mag)} {name}"


def dump_problem(problem, path):
    """Write a human-readable LP-style dump for external cross-checking.

    Grammar (one item per line):
      sense: min|max
      obj: <term> [+|- <term> ...] [+ const <v>]      term = <coef> <varname>
            quadratic terms rendered as <coef> <varname>^2
      row <tag>: <terms> <=|>=|= <rhs>
      bound: <lb> <= <varname> <= <ub>                (inf allowed)
      integer: <varname> ...                          (if any)
    """
    p = problem
    lines = [f"sense: {p.sense}"]
    parts = []
    first = True
    for j in range(p.num_vars):
        q = p.quadratic_diag[j]
        if q != 0:
            parts.append(_term(0.5 * q, p.variable_names[j] + "^2", first))
            first = False
        c = p.linear_cost[j]
        if c != 0:
            parts.append(_term(c, p.variable_names[j], first))
            first = False
    if p.objective_constant != 0 or first:
        parts.append(_term(p.objective_constant, "const", first) or "0 const")
    lines.append("obj:" + ("".join(parts) if parts else " 0"))
    for con in p.constraints:
        tag = ".".join(str(t) for t in con.tag) if con.tag else "row"
        terms = ""
        first = True
        for j in np.flatnonzero(con.coeffs):
            terms += _term(con.coeffs[j], p.variable_names[j], first)
            first = False
        if first:
            terms = "0"
        lines.append(f"row {tag}: {terms} {con.rel} {_fmt(con.rhs)}")
    for j, (lo, hi) in enumerate(p.variable_bounds):
        lines.append(f"bound: {_fmt(lo)} <= {p.variable_names[j]} <= {_fmt(hi)}")
    ints = [p.variable_names[j] for j in np.flatnonzero(p.integer_mask)]
    if ints:
        lines.append("integer: " + " ".join(ints))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
