"""Formulation builders for hinge-loss and ramp-loss classifiers.

Column order is fixed per norm. With the L1 norm the weight vector is split
into a nonnegative difference, so a full model reads
[w+ (d), w- (d), b, xi (n), z (n)]; with the L2 norm it reads
[w (d), b, xi (n), z (n)]. Plain hinge models drop the z block. Constraint
tags name rows by meaning (("margin", i), ("valid_ineq", i), ("ub_cut",),
("pair_bound", k), ("aggregate_bound",)) so downstream code can address
duals without tracking row numbers.
"""

import numpy as np

from .problems import GE, LE, Constraint, ConvexProblem

L1 = "l1"
L2 = "l2"
INF = float("inf")


def _check_norm(norm):
    if norm not in (L1, L2):
        raise ValueError(f"norm must be {L1!r} or {L2!r}")


class Layout:
    """Column offsets into the variable vector for one model shape."""

    def __init__(self, n, d, norm, with_z=True):
        _check_norm(norm)
        self.n = n
        self.d = d
        self.norm = norm
        self.with_z = with_z
        width = 2 * d if norm == L1 else d
        self.b = width
        self.xi0 = width + 1
        self.z0 = width + 1 + n if with_z else None
        self.size = width + 1 + n + (n if with_z else 0)
        self.xi_cols = slice(self.xi0, self.xi0 + n)
        self.z_cols = slice(self.z0, self.z0 + n) if with_z else None
        if norm == L1:
            self.wp_cols = slice(0, d)
            self.wm_cols = slice(d, 2 * d)
        else:
            self.w_cols = slice(0, d)

    def wp(self, k):
        return k

    def wm(self, k):
        return self.d + k

    def w(self, k):
        return k

    def xi(self, i):
        return self.xi0 + i

    def z(self, i):
        return self.z0 + i

    def names(self):
        out = []
        if self.norm == L1:
            out += [f"wp{k}" for k in range(self.d)]
            out += [f"wm{k}" for k in range(self.d)]
        else:
            out += [f"w{k}" for k in range(self.d)]
        out.append("b")
        out += [f"xi{i}" for i in range(self.n)]
        if self.with_z:
            out += [f"z{i}" for i in range(self.n)]
        return out

    def weights(self, x):
        """Signed weight vector from a primal point."""
        x = np.asarray(x, dtype=float)
        if self.norm == L1:
            return x[self.wp_cols] - x[self.wm_cols]
        return x[self.w_cols]


class RampLossModel:
    """Configuration for one ramp-loss instance: norm, cost, and big-M data.

    Bound fields start at infinity and are narrowed by the tightening
    passes; pair_ub carries the per-coordinate caps on w_k+ + w_k-, which
    only make sense as rows (each couples the two halves of a coordinate).
    """

    def __init__(self, norm, C, M, wplus_ub=None, wminus_ub=None,
                 w_lb=None, w_ub=None, b_lb=-INF, b_ub=INF,
                 use_valid_ineq=True, pair_ub=None):
        _check_norm(norm)
        if C <= 0:
            raise ValueError("C must be positive")
        self.norm = norm
        self.C = float(C)
        self.M = np.asarray(M, dtype=float)
        self.wplus_ub = None if wplus_ub is None else np.asarray(wplus_ub, float)
        self.wminus_ub = None if wminus_ub is None else np.asarray(wminus_ub, float)
        self.w_lb = None if w_lb is None else np.asarray(w_lb, float)
        self.w_ub = None if w_ub is None else np.asarray(w_ub, float)
        self.b_lb = float(b_lb)
        self.b_ub = float(b_ub)
        self.use_valid_ineq = bool(use_valid_ineq)
        self.pair_ub = None if pair_ub is None else np.asarray(pair_ub, float)

    def copy(self):
        return RampLossModel(
            self.norm, self.C, self.M.copy(),
            None if self.wplus_ub is None else self.wplus_ub.copy(),
            None if self.wminus_ub is None else self.wminus_ub.copy(),
            None if self.w_lb is None else self.w_lb.copy(),
            None if self.w_ub is None else self.w_ub.copy(),
            self.b_lb, self.b_ub, self.use_valid_ineq,
            None if self.pair_ub is None else self.pair_ub.copy())


def ramp_objective(norm, C, w, xi, z):
    """Recompute norm term + C*(sum xi + 2 sum z) from raw values."""
    w = np.asarray(w, dtype=float)
    term = float(np.sum(np.abs(w))) if norm == L1 else 0.5 * float(np.dot(w, w))
    return term + C * (float(np.sum(xi)) + 2.0 * float(np.sum(z)))


class FeasiblePoint:
    """A point satisfying the conditional-margin model, with its objective."""

    def __init__(self, norm, C, w, b, xi, z):
        _check_norm(norm)
        self.norm = norm
        self.C = float(C)
        self.w = np.asarray(w, dtype=float)
        self.wp = np.maximum(self.w, 0.0)
        self.wm = np.maximum(-self.w, 0.0)
        self.b = float(b)
        self.xi = np.asarray(xi, dtype=float)
        self.z = np.asarray(z, dtype=float)
        self.objective = ramp_objective(norm, C, self.w, self.xi, self.z)

    def violations(self, ds, tol=1e-7):
        """Check the conditional model: margin holds wherever z_i = 0."""
        bad = []
        scores = ds.X @ self.w + self.b
        for i in range(ds.n):
            if self.z[i] < 0.5 and ds.y[i] * scores[i] < 1 - self.xi[i] - tol:
                bad.append(f"instance {i}: margin {ds.y[i] * scores[i]:.6g} "
                           f"< 1 - {self.xi[i]:.6g}")
            if not -tol <= self.xi[i] <= 2 + tol:
                bad.append(f"instance {i}: xi out of [0,2]")
            if min(abs(self.z[i]), abs(self.z[i] - 1)) > tol:
                bad.append(f"instance {i}: z not binary")
        return bad

    @classmethod
    def from_primal(cls, layout, x, C):
        x = np.asarray(x, dtype=float)
        z = x[layout.z_cols] if layout.with_z else np.zeros(layout.n)
        return cls(layout.norm, C, layout.weights(x), x[layout.b],
                   x[layout.xi_cols], np.rint(z))


def _margin_row(layout, x_i, y_i, i, M_i=None):
    c = np.zeros(layout.size)
    if layout.norm == L1:
        c[layout.wp_cols] = y_i * x_i
        c[layout.wm_cols] = -y_i * x_i
    else:
        c[layout.w_cols] = y_i * x_i
    c[layout.b] = y_i
    c[layout.xi(i)] = 1.0
    if M_i is not None:
        c[layout.z(i)] = M_i
    return Constraint(c, GE, 1.0, tag=("margin", i))


def _valid_ineq_row(layout, i):
    c = np.zeros(layout.size)
    c[layout.xi(i)] = 1.0
    c[layout.z(i)] = 2.0
    return Constraint(c, LE, 2.0, tag=("valid_ineq", i))


def pair_bound_row(layout, k, ub):
    c = np.zeros(layout.size)
    c[layout.wp(k)] = 1.0
    c[layout.wm(k)] = 1.0
    return Constraint(c, LE, ub, tag=("pair_bound", k))


def ub_cut_row(layout, C, ub):
    """Objective cap: full ramp objective must not exceed a known bound.

    Linear only, so this is the L1 form. The L2 twin is quadratic and lives
    in the cutting-plane region instead.
    """
    c = np.zeros(layout.size)
    c[layout.wp_cols] = 1.0
    c[layout.wm_cols] = 1.0
    c[layout.xi_cols] = C
    c[layout.z_cols] = 2.0 * C
    return Constraint(c, LE, ub, tag=("ub_cut",))


def _objective(layout, C):
    cost = np.zeros(layout.size)
    quad = None
    if layout.norm == L1:
        cost[layout.wp_cols] = 1.0
        cost[layout.wm_cols] = 1.0
    else:
        quad = np.zeros(layout.size)
        quad[layout.w_cols] = 1.0
    cost[layout.xi_cols] = C
    if layout.with_z:
        cost[layout.z_cols] = 2.0 * C
    return cost, quad


def build_svm(ds, norm, C):
    """Plain soft-margin hinge model: xi is unbounded above here."""
    _check_norm(norm)
    if C <= 0:
        raise ValueError("C must be positive")
    layout = Layout(ds.n, ds.d, norm, with_z=False)
    cost, quad = _objective(layout, C)
    rows = [_margin_row(layout, ds.X[i], ds.y[i], i) for i in range(ds.n)]
    bounds = _weight_bounds(layout, None) + [(-INF, INF)]
    bounds += [(0.0, INF)] * ds.n
    return ConvexProblem("min", cost, rows, bounds, layout.names(),
                         quadratic_diag=quad)


def _weight_bounds(layout, cfg):
    if layout.norm == L1:
        up = cfg.wplus_ub if cfg is not None and cfg.wplus_ub is not None \
            else np.full(layout.d, INF)
        um = cfg.wminus_ub if cfg is not None and cfg.wminus_ub is not None \
            else np.full(layout.d, INF)
        return [(0.0, float(up[k])) for k in range(layout.d)] + \
               [(0.0, float(um[k])) for k in range(layout.d)]
    lo = cfg.w_lb if cfg is not None and cfg.w_lb is not None \
        else np.full(layout.d, -INF)
    hi = cfg.w_ub if cfg is not None and cfg.w_ub is not None \
        else np.full(layout.d, INF)
    return [(float(lo[k]), float(hi[k])) for k in range(layout.d)]


def restricted_svm(ds, norm, C, ztilde):
    """Hinge model over the instances kept active by a fixed z pattern.

    Margin rows exist only where ztilde_i = 0, those xi are capped at 2,
    and the xi of dropped instances are pinned to zero. The 2*C*sum(ztilde)
    term is constant and left out; callers add it when they want the full
    ramp objective.
    """
    _check_norm(norm)
    ztilde = np.asarray(ztilde)
    if ztilde.shape != (ds.n,) or not np.all((ztilde == 0) | (ztilde == 1)):
        raise ValueError("ztilde must be a binary vector of length n")
    layout = Layout(ds.n, ds.d, norm, with_z=False)
    cost, quad = _objective(layout, C)
    rows = [_margin_row(layout, ds.X[i], ds.y[i], i)
            for i in range(ds.n) if ztilde[i] == 0]
    bounds = _weight_bounds(layout, None) + [(-INF, INF)]
    bounds += [(0.0, 2.0) if ztilde[i] == 0 else (0.0, 0.0)
               for i in range(ds.n)]
    return ConvexProblem("min", cost, rows, bounds, layout.names(),
                         quadratic_diag=quad)


def feasible_from_svm(svm_solution, ds, norm, C):
    """Truncation rule: instances whose hinge slack passed 2 are written off
    (z=1, xi=0), everything else keeps its slack."""
    layout = Layout(ds.n, ds.d, norm, with_z=False)
    x = np.asarray(svm_solution.primal, dtype=float)
    w = layout.weights(x)
    xi_svm = x[layout.xi_cols]
    z = (xi_svm > 2.0).astype(float)
    xi = np.where(z == 1.0, 0.0, xi_svm)
    return FeasiblePoint(norm, C, w, x[layout.b], xi, z)


def _assemble(ds, cfg, integer):
    layout = Layout(ds.n, ds.d, cfg.norm, with_z=True)
    if cfg.M.shape != (ds.n,):
        raise ValueError("M must have one entry per instance")
    if not np.all(np.isfinite(cfg.M)):
        raise ValueError("M entries must be finite")
    cost, quad = _objective(layout, cfg.C)
    rows = [_margin_row(layout, ds.X[i], ds.y[i], i, cfg.M[i])
            for i in range(ds.n)]
    if cfg.use_valid_ineq:
        rows += [_valid_ineq_row(layout, i) for i in range(ds.n)]
    if cfg.pair_ub is not None:
        rows += [pair_bound_row(layout, k, cfg.pair_ub[k])
                 for k in range(ds.d) if np.isfinite(cfg.pair_ub[k])]
    bounds = _weight_bounds(layout, cfg) + [(cfg.b_lb, cfg.b_ub)]
    bounds += [(0.0, 2.0)] * ds.n
    bounds += [(0.0, 1.0)] * ds.n
    mask = None
    if integer:
        mask = np.zeros(layout.size, dtype=bool)
        mask[layout.z_cols] = True
    problem = ConvexProblem("min", cost, rows, bounds, layout.names(),
                            quadratic_diag=quad, integer_mask=mask)
    return problem, layout


def build_rl_mip(ds, cfg):
    """Ramp-loss model with margins linearized through the M vector; z is
    marked integral."""
    problem, _ = _assemble(ds, cfg, integer=True)
    return problem


def build_relaxation(ds, cfg):
    """Same feasible region with z relaxed to [0,1]."""
    problem, _ = _assemble(ds, cfg, integer=False)
    return problem


def shift_variable(problem, j, shift):
    """Re-express the problem in x_j - shift. Exact affine change: rhs and
    bounds translate, the objective picks up the constant and (for a
    quadratic term) linear correction."""
    shift = float(shift)
    rows = [Constraint(c.coeffs, c.rel, c.rhs - c.coeffs[j] * shift, c.tag)
            for c in problem.constraints]
    cost = problem.linear_cost.copy()
    const = problem.objective_constant + cost[j] * shift
    q = problem.quadratic_diag
    if q[j] != 0.0:
        cost[j] += q[j] * shift
        const += 0.5 * q[j] * shift * shift
    lo, hi = problem.variable_bounds[j]
    bounds = list(problem.variable_bounds)
    bounds[j] = (lo - shift, hi - shift)
    names = list(problem.variable_names)
    names[j] = names[j] + "_sh"
    mask = problem.integer_mask if np.any(problem.integer_mask) else None
    return ConvexProblem(problem.sense, cost, rows, bounds, names,
                         quadratic_diag=q, objective_constant=const,
                         integer_mask=mask)


def build_shifted(ds, cfg, k0, sign, shift):
    """Relaxation re-centered so the chosen weight coordinate sits at zero.

    sign picks the positive or negative split part for the L1 norm and is
    ignored ('none') for L2. The shifted optimum equals the unshifted one;
    this builder exists so that equality can be checked directly.
    """
    relax = build_relaxation(ds, cfg)
    layout = Layout(ds.n, ds.d, cfg.norm, with_z=True)
    if cfg.norm == L1:
        if sign == "+":
            j = layout.wp(k0)
        elif sign == "-":
            j = layout.wm(k0)
        else:
            raise ValueError("sign must be '+' or '-' for the L1 norm")
    else:
        if sign not in (None, "none"):
            raise ValueError("sign does not apply to the L2 norm")
        j = layout.w(k0)
    return shift_variable(relax, j, shift)
