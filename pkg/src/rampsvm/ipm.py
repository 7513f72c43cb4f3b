"""Predictor-corrector primal-dual interior point for diagonal convex QP.

Handles min 0.5 x'diag(Q)x + c'x over linear rows and variable bounds.
Equality rows and fixed variables go into an E block; every other row and
finite bound becomes a one-sided inequality in G. Feasibility is certified
up front with a simplex phase-1 run, so the IPM itself only ever sees
feasible problems and its failure mode is a loud SolverFailure, never a
silent wrong answer.
"""

import numpy as np

from .problems import EQ, GE, LE, SolverFailure
from .simplex import SimplexCore

RESID_TARGET = 1e-9
ACCEPT_TOL = 1e-8
MAX_ITER = 100


def _separable_optimum(Q, c, lb, ub):
    """Coordinate-wise minimum when there are no constraint rows."""
    x = np.zeros_like(c)
    for j in range(c.size):
        if Q[j] > 0:
            x[j] = min(max(-c[j] / Q[j], lb[j]), ub[j])
        elif c[j] > 0:
            if not np.isfinite(lb[j]):
                return None
            x[j] = lb[j]
        elif c[j] < 0:
            if not np.isfinite(ub[j]):
                return None
            x[j] = ub[j]
        else:
            x[j] = min(max(0.0, lb[j]), ub[j])
    return x


def solve_qp_core(Q, c, A, rel, b, lb, ub):
    """Minimize over the region. Returns a dict like SimplexCore.solve."""
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    lb = np.asarray(lb, dtype=float)
    ub = np.asarray(ub, dtype=float)
    nv = c.size
    A = np.asarray(A, dtype=float).reshape(-1, nv)
    b = np.asarray(b, dtype=float)
    m = A.shape[0]

    if m == 0 and not np.any((lb == ub) & np.isfinite(lb)):
        x = _separable_optimum(Q, c, lb, ub)
        if x is None:
            return {"status": "unbounded", "ray": None}
        rc = Q * x + c
        return {"status": "optimal", "x": x,
                "obj": float(0.5 * np.dot(Q * x, x) + np.dot(c, x)),
                "y": np.zeros(0), "rc": rc}

    # certified feasibility check (and warm point) via simplex phase 1
    probe = SimplexCore(A, rel, b, lb, ub)
    feas = probe.solve(np.zeros(nv))
    if feas["status"] == "infeasible":
        return {"status": "infeasible"}
    x0 = feas["x"]

    # split rows: E x = f, G x >= h; bounds and fixed variables included
    E_rows, f_vals = [], []
    G_rows, h_vals = [], []
    g_meta = []   # (row index or None, sign) to map duals back
    e_meta = []
    for j in range(m):
        if rel[j] == EQ:
            E_rows.append(A[j]); f_vals.append(b[j]); e_meta.append(j)
        elif rel[j] == GE:
            G_rows.append(A[j]); h_vals.append(b[j]); g_meta.append((j, 1.0))
        else:
            G_rows.append(-A[j]); h_vals.append(-b[j]); g_meta.append((j, -1.0))
    for v in range(nv):
        if lb[v] == ub[v] and np.isfinite(lb[v]):
            row = np.zeros(nv); row[v] = 1.0
            E_rows.append(row); f_vals.append(lb[v]); e_meta.append(None)
            continue
        if np.isfinite(lb[v]):
            row = np.zeros(nv); row[v] = 1.0
            G_rows.append(row); h_vals.append(lb[v]); g_meta.append((None, 0.0))
        if np.isfinite(ub[v]):
            row = np.zeros(nv); row[v] = -1.0
            G_rows.append(row); h_vals.append(-ub[v]); g_meta.append((None, 0.0))

    E = np.array(E_rows).reshape(-1, nv)
    f = np.array(f_vals)
    G = np.array(G_rows).reshape(-1, nv)
    h = np.array(h_vals)
    mE, mG = E.shape[0], G.shape[0]

    if mG == 0:
        # equality-constrained QP: one KKT solve
        K = np.zeros((nv + mE, nv + mE))
        K[:nv, :nv] = np.diag(Q + 1e-12)
        K[:nv, nv:] = E.T
        K[nv:, :nv] = E
        rhs = np.concatenate([-c, f])
        try:
            sol = np.linalg.solve(K, rhs)
        except np.linalg.LinAlgError:
            raise SolverFailure("singular equality KKT system")
        x = sol[:nv]
        nu = -sol[nv:]
        return _package(Q, c, A, rel, x, nu, np.zeros(0), e_meta, g_meta, m)

    x = x0.copy()
    s = np.maximum(G @ x - h, 1.0)
    lam = np.ones(mG)
    nu = np.zeros(mE)

    scale_d = 1.0 + np.max(np.abs(c))
    scale_p = 1.0 + (np.max(np.abs(h)) if mG else 0.0) + (
        np.max(np.abs(f)) if mE else 0.0)

    best = None
    best_err = np.inf
    for _ in range(MAX_ITER):
        rd = Q * x + c - G.T @ lam - (E.T @ nu if mE else 0.0)
        rE = (E @ x - f) if mE else np.zeros(0)
        rG = G @ x - s - h
        mu = float(s @ lam) / mG
        err = max(np.max(np.abs(rd)) / scale_d,
                  (np.max(np.abs(rE)) / scale_p) if mE else 0.0,
                  np.max(np.abs(rG)) / scale_p,
                  mu / (1.0 + abs(float(c @ x))))
        if err < best_err:
            best_err = err
            best = (x.copy(), lam.copy(), nu.copy())
        if err <= RESID_TARGET:
            break

        W = lam / s
        H = np.diag(Q + 1e-12) + (G.T * W) @ G
        K = np.zeros((nv + mE, nv + mE))
        K[:nv, :nv] = H
        if mE:
            K[:nv, nv:] = E.T
            K[nv:, :nv] = E
            K[nv:, nv:] = -1e-12 * np.eye(mE)

        def kkt_solve(rc_comp):
            r1 = -rd - G.T @ (W * rG + rc_comp / s)
            rhs = np.concatenate([r1, -rE]) if mE else r1
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                K[:nv, :nv] += 1e-8 * np.eye(nv)
                sol = np.linalg.solve(K, rhs)
            dx = sol[:nv]
            # the symmetric block carries -dnu, same convention as the
            # equality-only branch above
            dnu = -sol[nv:] if mE else np.zeros(0)
            ds = G @ dx + rG
            dlam = -(rc_comp + lam * ds) / s
            return dx, dnu, ds, dlam

        # predictor
        rc_aff = s * lam
        dx_a, dnu_a, ds_a, dlam_a = kkt_solve(rc_aff)
        a_p = _max_step(s, ds_a)
        a_d = _max_step(lam, dlam_a)
        mu_aff = float((s + a_p * ds_a) @ (lam + a_d * dlam_a)) / mG
        sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0

        # corrector
        rc_cor = rc_aff + ds_a * dlam_a - sigma * mu * np.ones(mG)
        dx, dnu, ds, dlam = kkt_solve(rc_cor)
        a_p = min(1.0, 0.995 * _max_step(s, ds))
        a_d = min(1.0, 0.995 * _max_step(lam, dlam))
        x += a_p * dx
        s += a_p * ds
        lam += a_d * dlam
        if mE:
            nu += a_d * dnu

    if best_err > ACCEPT_TOL * 10:
        raise SolverFailure(
            f"interior point did not converge (residual {best_err:.2e})")
    x, lam, nu = best
    return _package(Q, c, A, rel, x, nu, lam, e_meta, g_meta, m)


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _package(Q, c, A, rel, x, nu, lam, e_meta, g_meta, m):
    y = np.zeros(m)
    for idx, j in enumerate(e_meta):
        if j is not None:
            y[j] = nu[idx]
    for idx, (j, sign) in enumerate(g_meta):
        if j is not None:
            y[j] = sign * lam[idx]
    rc = Q * x + c - (A.T @ y if m else 0.0)
    obj = float(0.5 * np.dot(Q * x, x) + np.dot(c, x))
    return {"status": "optimal", "x": x, "obj": obj, "y": y, "rc": rc}
