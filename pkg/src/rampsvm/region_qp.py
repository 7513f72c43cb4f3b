"""Structured interior point for the quadratic-norm tightening subproblems.

Every one of those subproblems optimizes a linear function over the same
shape of region: margin rows that couple the weights and intercept to one
slack and one indicator per instance, boxes on all variables, and either a
quadratic cap on the incumbent objective or a quadratic objective term (the
convex relaxation itself). No row couples two instances directly, so the
Newton system of a primal-dual step condenses to a dense solve in the
weight/intercept block after eliminating 2x2 per-instance blocks, plus one
border column for the cap. A batch of objectives over one region runs in
lockstep with a leading task axis, which keeps the per-task cost at a few
small dense solves per iteration.

The general-purpose cutting-plane region in solver.py handles the same
subproblems; it stays the reference implementation the tests compare
against, but it needs far too many tangents per objective once the weight
dimension grows.
"""

import numpy as np

from .problems import OPTIMAL, UNBOUNDED, SolverFailure

RESID_TARGET = 1e-9
# best iterates above RESID_TARGET are still accepted up to here; callers
# receive the achieved residual and must pad any bound they derive by it.
# degenerate complementarity floors a path at about sqrt(eps) times the
# conditioning, which lands between the two thresholds in practice
ACCEPT_RESID = 1e-6
MAX_ITER = 100
# a task is stalled when a full window of iterations fails to improve its
# best residual by the factor below; slow-but-steady linear convergence
# passes, a residual cycling around a numerical floor does not. stalled
# tasks are finished at their best iterate rather than ground until their
# duals overflow
STALL_WINDOW = 10
STALL_FACTOR = 0.9
# complementarity weights above this act as pinned and are clamped, which
# regularizes the Newton system without touching the measured residuals
W_CAP = 1e14
B_BIG = 1e7
# a solution within this fraction of an artificial wall's scale means the
# true problem escapes in that direction
WALL_REL = 1e-3


class RegionSpec:
    """Frozen arrays describing one family of tightening subproblems.

    Variables are laid out w | b | v | xi | z, where the magnitude block v
    exists only when v_ub is given. Infinite bounds are replaced by a wide
    artificial box so slacks stay finite; a solution pressed against an
    artificial wall is reported unbounded rather than optimal.
    """

    def __init__(self, X, y, M, C, w_lb=None, w_ub=None, b_lb=-np.inf,
                 b_ub=np.inf, cap_rhs=None, sigma=0.0, valid_ineq=False,
                 v_ub=None):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.M = np.asarray(M, dtype=float)
        self.C = float(C)
        self.n, self.d = self.X.shape
        self.cap_rhs = None if cap_rhs is None else float(cap_rhs)
        self.sigma = float(sigma)
        self.valid_ineq = bool(valid_ineq)
        self.has_v = v_ub is not None

        d, n = self.d, self.n
        self.iw = slice(0, d)
        self.ib = d
        off = d + 1
        if self.has_v:
            self.iv = slice(off, off + d)
            off += d
        else:
            self.iv = None
        self.ixi = slice(off, off + n)
        self.iz = slice(off + n, off + 2 * n)
        self.nv = off + 2 * n

        lo = np.full(self.nv, -np.inf)
        hi = np.full(self.nv, np.inf)
        if w_lb is not None:
            lo[self.iw] = w_lb
        if w_ub is not None:
            hi[self.iw] = w_ub
        lo[self.ib] = b_lb
        hi[self.ib] = b_ub
        if self.has_v:
            lo[self.iv] = 0.0
            hi[self.iv] = np.asarray(v_ub, dtype=float)
        lo[self.ixi] = 0.0
        hi[self.ixi] = 2.0
        lo[self.iz] = 0.0
        hi[self.iz] = 1.0
        self.art_lo = ~np.isfinite(lo)
        self.art_hi = ~np.isfinite(hi)
        # walls at problem scale wherever the region itself implies a
        # bound: the cap limits every weight, and margin rows pin the
        # intercept once both classes are present. wide walls are only a
        # last resort, because their huge slacks dominate the barrier
        # average and push every real complementarity pair off center
        wall_lo = np.full(self.nv, -B_BIG)
        wall_hi = np.full(self.nv, B_BIG)
        if self.cap_rhs is not None:
            wreach = np.sqrt(2.0 * max(self.cap_rhs, 0.0))
            wall_lo[self.iw] = -wreach
            wall_hi[self.iw] = wreach
        wcap = np.maximum(np.abs(np.where(self.art_lo[self.iw],
                                          wall_lo[self.iw], lo[self.iw])),
                          np.abs(np.where(self.art_hi[self.iw],
                                          wall_hi[self.iw], hi[self.iw])))
        pos = self.y > 0.0
        if pos.any() and (~pos).any():
            # one margin row per class caps how far b can drift: the slack
            # and indicator terms contribute at most 2 + M_i z_i, the
            # weights at most the reach of that row's features over the w
            # box. M_i z_i peaks at zero when M_i is negative, since the
            # indicator cannot go below it
            span = np.abs(self.X) @ wcap + np.maximum(self.M, 0.0) + 1.0
            wall_hi[self.ib] = min(B_BIG, float(span[~pos].min()))
            wall_lo[self.ib] = max(-B_BIG, -float(span[pos].min()))
        self.lo = np.where(self.art_lo, wall_lo, lo)
        self.hi = np.where(self.art_hi, wall_hi, hi)
        self.wall_tol = WALL_REL * (1.0 + np.maximum(np.abs(self.lo),
                                                     np.abs(self.hi)))

        self.Xt = np.hstack([self.X, np.ones((n, 1))])
        real = [1.0, 2.0]
        real.extend(np.abs(lo[np.isfinite(lo)]))
        real.extend(np.abs(hi[np.isfinite(hi)]))
        if self.cap_rhs is not None:
            real.append(abs(self.cap_rhs))
        self.scale_p = 1.0 + float(max(real))


def solve_batch(spec, tasks):
    """Solve (coeffs, sense) tasks over one region in lockstep.

    Returns one dict per task with status, objective, x, alpha (margin
    duals), t (cap dual), and iterations. Raises SolverFailure if any task
    fails to reach an acceptable residual.
    """
    if not tasks:
        return []
    T = len(tasks)
    cmin = np.empty((T, spec.nv))
    sign = np.empty(T)
    for k, (coeffs, sense) in enumerate(tasks):
        if sense not in ("min", "max"):
            raise ValueError(f"sense must be min or max, got {sense!r}")
        if sense == "max" and spec.sigma != 0.0:
            raise ValueError("maximization with a quadratic objective")
        sign[k] = -1.0 if sense == "max" else 1.0
        cmin[k] = sign[k] * np.asarray(coeffs, dtype=float)
    results = _mehrotra(spec, cmin)
    for k in range(T):
        results[k]["objective"] = float(sign[k] * results[k]["objective"])
    return results


def solve_one(spec, coeffs, sense):
    return solve_batch(spec, [(coeffs, sense)])[0]


class _Family:
    """One block of linear inequality rows lin(x) + const >= 0."""

    def __init__(self, name, lin, adj, const):
        self.name = name
        self.lin = lin
        self.adj = adj
        self.const = const

    def val(self, x):
        return self.lin(x) + self.const


def _families(sp):
    fams = []

    def bounds_lo_adj(lam, out):
        out += lam

    def bounds_hi_adj(lam, out):
        out -= lam

    fams.append(_Family("blo", lambda v: v, bounds_lo_adj, -sp.lo))
    fams.append(_Family("bhi", lambda v: -v, bounds_hi_adj, sp.hi))

    def mar_lin(v):
        return sp.y * (v[:, sp.iw] @ sp.X.T + v[:, [sp.ib]]) \
            + v[:, sp.ixi] + sp.M * v[:, sp.iz]

    def mar_adj(lam, out):
        ly = lam * sp.y
        out[:, sp.iw] += ly @ sp.X
        out[:, sp.ib] += ly.sum(axis=1)
        out[:, sp.ixi] += lam
        out[:, sp.iz] += lam * sp.M

    fams.append(_Family("margin", mar_lin, mar_adj, -1.0))

    if sp.valid_ineq:
        def vi_lin(v):
            return -v[:, sp.ixi] - 2.0 * v[:, sp.iz]

        def vi_adj(lam, out):
            out[:, sp.ixi] -= lam
            out[:, sp.iz] -= 2.0 * lam

        fams.append(_Family("valid", vi_lin, vi_adj, 2.0))

    if sp.has_v:
        def ap_lin(v):
            return v[:, sp.iv] - v[:, sp.iw]

        def ap_adj(lam, out):
            out[:, sp.iw] -= lam
            out[:, sp.iv] += lam

        def am_lin(v):
            return v[:, sp.iv] + v[:, sp.iw]

        def am_adj(lam, out):
            out[:, sp.iw] += lam
            out[:, sp.iv] += lam

        fams.append(_Family("absp", ap_lin, ap_adj, 0.0))
        fams.append(_Family("absm", am_lin, am_adj, 0.0))
    return fams


def _cap_val(sp, x):
    w = x[:, sp.iw]
    return sp.cap_rhs - 0.5 * (w * w).sum(axis=1) \
        - sp.C * x[:, sp.ixi].sum(axis=1) \
        - 2.0 * sp.C * x[:, sp.iz].sum(axis=1)


def _cap_grad(sp, x):
    g = np.zeros_like(x)
    g[:, sp.iw] = -x[:, sp.iw]
    g[:, sp.ixi] = -sp.C
    g[:, sp.iz] = -2.0 * sp.C
    return g


def _max_step(v, dv):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(dv < -0.0, -v / dv, np.inf)
    if r.ndim == 1:
        return np.minimum(1.0, r)
    return np.minimum(1.0, r.min(axis=1))


def _cap_root(st, B, A):
    """Largest step keeping the quadratic cap slack positive.

    The true slack along a step is st + a*B - a^2*A with A >= 0, concave
    in a, so the linear wall rule underestimates how fast the surface
    approaches; this returns the exact crossing instead.
    """
    tiny = 1e-300
    disc = B * B + 4.0 * A * st
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = (B + np.sqrt(np.maximum(disc, 0.0))) \
            / (2.0 * np.maximum(A, tiny))
        lin = np.where(B < 0.0, st / np.maximum(-B, tiny), np.inf)
    return np.minimum(1.0, np.where(A > tiny, quad, lin))


class _Condensed:
    """Per-iteration Newton matrix in eliminated form.

    Holds the 2x2 per-instance pair blocks, the magnitude eliminations, and
    the dense weight/intercept Schur complement, so a solve is two small
    triangular passes plus elementwise work.
    """

    def __init__(self, sp, Wd, wdiag_extra):
        self.sp = sp
        d, n = sp.d, sp.n
        diag = Wd["blo"] + Wd["bhi"]
        om = Wd["margin"]
        self.om = om
        dxi = diag[:, sp.ixi]
        dz = diag[:, sp.iz]
        vv = Wd["valid"] if sp.valid_ineq else 0.0
        self.p11 = om + vv + dxi
        self.p12 = om * sp.M + 2.0 * vv
        self.p22 = om * sp.M ** 2 + 4.0 * vv + dz
        # the naive 2x2 determinant cancels its om^2 M^2 terms exactly, so
        # expand it by hand; same for the eliminated weight on the margin
        rest = 4.0 * vv * dxi + vv * dz + dxi * dz
        self.det = om * (dxi * sp.M ** 2 + dz + vv * (sp.M - 2.0) ** 2) + rest
        omt = om * rest / self.det

        wdiag = diag[:, sp.iw] + wdiag_extra
        if sp.has_v:
            wp = Wd["absp"]
            wm = Wd["absm"]
            self.vden = wp + wm + diag[:, sp.iv]
            self.vcross = wm - wp
            wdiag = wdiag + (wp + wm) - self.vcross ** 2 / self.vden

        A = sp.Xt[None, :, :] * omt[:, :, None]
        S = np.matmul(A.transpose(0, 2, 1), np.broadcast_to(
            sp.Xt, (omt.shape[0],) + sp.Xt.shape))
        S[:, np.arange(d), np.arange(d)] += wdiag
        S[:, d, d] += diag[:, sp.ib]
        self.S = S

    def _pinv_apply(self, r1, r2):
        a = (self.p22 * r1 - self.p12 * r2) / self.det
        b = (-self.p12 * r1 + self.p11 * r2) / self.det
        return a, b

    def reduce(self, r):
        sp = self.sp
        a, b = self._pinv_apply(r[:, sp.ixi], r[:, sp.iz])
        dot = a + sp.M * b
        ru = np.concatenate([r[:, sp.iw], r[:, [sp.ib]]], axis=1)
        ru -= (self.om * sp.y * dot) @ sp.Xt
        if sp.has_v:
            ru[:, :sp.d] -= (self.vcross / self.vden) * r[:, sp.iv]
        return ru

    def expand(self, r, du):
        sp = self.sp
        dx = np.zeros_like(r)
        dw = du[:, :sp.d]
        dx[:, sp.iw] = dw
        dx[:, sp.ib] = du[:, sp.d]
        if sp.has_v:
            dx[:, sp.iv] = (r[:, sp.iv] - self.vcross * dw) / self.vden
        proj = self.om * sp.y * (du @ sp.Xt.T)
        dxi, dz = self._pinv_apply(r[:, sp.ixi] - proj,
                                   r[:, sp.iz] - sp.M * proj)
        dx[:, sp.ixi] = dxi
        dx[:, sp.iz] = dz
        return dx

    def solve(self, rhs_list):
        stacked = np.stack([self.reduce(r) for r in rhs_list], axis=-1)
        p = self.S.shape[1]
        rng = np.arange(p)
        scale = 1.0 + np.abs(self.S).max(axis=(1, 2))
        Sreg = self.S.copy()
        # the intercept diagonal can collapse when no margin row is active
        # yet, so always keep a relative floor under the pivots
        Sreg[:, rng, rng] += (1e-13 * scale)[:, None]
        try:
            sols = np.linalg.solve(Sreg, stacked)
        except np.linalg.LinAlgError:
            Sreg[:, rng, rng] += (1e-7 * scale)[:, None]
            try:
                sols = np.linalg.solve(Sreg, stacked)
            except np.linalg.LinAlgError:
                raise SolverFailure("condensed newton system is singular")
        return [self.expand(r, sols[:, :, k])
                for k, r in enumerate(rhs_list)]


def _mehrotra(sp, cmin):
    T = cmin.shape[0]
    fams = _families(sp)
    has_cap = sp.cap_rhs is not None
    m_total = 2 * sp.nv + sp.n + (sp.n if sp.valid_ineq else 0) \
        + (2 * sp.d if sp.has_v else 0) + (1 if has_cap else 0)

    x = np.tile((sp.lo + sp.hi) / 2.0, (T, 1))
    if has_cap:
        # start strictly inside the cap: blend the box midpoint toward the
        # box point friendliest to the cap, stopping while a tenth of that
        # point's slack remains. the cap slack is then kept exactly equal
        # to the quadratic's value at every iterate, because letting it
        # drift on the linearized update feeds the model mismatch back in
        # as primal infeasibility the moment steps get long
        inset = 0.01 * (sp.hi - sp.lo)
        anchor = x.copy()
        anchor[:, sp.iw] = np.clip(0.0, (sp.lo + inset)[sp.iw],
                                   (sp.hi - inset)[sp.iw])
        anchor[:, sp.ixi] = (sp.lo + inset)[sp.ixi]
        anchor[:, sp.iz] = (sp.lo + inset)[sp.iz]
        f0 = _cap_val(sp, anchor)
        if np.any(f0 <= 0.0):
            raise SolverFailure("objective cap leaves no room to start in")
        m0 = 0.1 * f0
        toward = x - anchor
        c1 = (_cap_grad(sp, anchor) * toward).sum(axis=1)
        c2 = -0.5 * (toward[:, sp.iw] ** 2).sum(axis=1)
        tau = np.ones(T)
        need = f0 + c1 + c2 < m0
        if np.any(need):
            c0 = f0 - m0
            with np.errstate(divide="ignore", invalid="ignore"):
                disc = np.sqrt(np.maximum(c1 * c1 - 4.0 * c2 * c0, 0.0))
                quad = (-c1 - disc) / (2.0 * c2)
                lin = np.where(c1 < 0.0, c0 / np.maximum(-c1, 1e-300), 1.0)
            root = np.where(c2 < -1e-300, quad, lin)
            tau = np.where(need, np.clip(root, 0.0, 1.0), tau)
        x = anchor + tau[:, None] * toward
        st = _cap_val(sp, x)
    F = {}
    for f in fams:
        v = f.val(x)
        s0 = np.maximum(v, 1.0)
        # keep initial complementarity products moderate even when an
        # artificial wall leaves a slack of B_BIG
        F[f.name] = {"s": s0, "lam": np.clip(100.0 / s0, 1e-4, 1.0)}
    if has_cap:
        tt = np.clip(100.0 / st, 1e-4, 1.0)

    live = np.arange(T)
    results = [None] * T
    scale_d = 1.0 + np.max(np.abs(cmin), axis=1)
    best_err = np.full(T, np.inf)
    best = [None] * T
    hist = np.full((T, STALL_WINDOW), np.inf)
    _dbg_ap = np.zeros(T)
    _dbg_ad = np.zeros(T)
    _dbg_guard = np.zeros(T, dtype=int)

    def snapshot(k):
        entry = {"x": x[k].copy(),
                 "alpha": F["margin"]["lam"][k].copy(),
                 "t": float(tt[k]) if has_cap else 0.0}
        return entry

    def record(orig, entry, iters):
        w = entry["x"][sp.iw]
        obj = float(cmin_orig[orig] @ entry["x"]) \
            + 0.5 * sp.sigma * float(w @ w)
        wall = (sp.art_lo & (entry["x"] - sp.lo < sp.wall_tol)) | \
               (sp.art_hi & (sp.hi - entry["x"] < sp.wall_tol))
        results[orig] = {
            "status": UNBOUNDED if bool(wall.any()) else OPTIMAL,
            "objective": obj, "x": entry["x"], "alpha": entry["alpha"],
            "t": entry["t"], "iterations": iters,
            "err": float(best_err[orig])}

    cmin_orig = cmin
    cmin = cmin.copy()

    for it in range(1, MAX_ITER + 1):
        rd = cmin.copy()
        rd[:, sp.iw] += sp.sigma * x[:, sp.iw]
        # adj accumulates with +, so subtract by negating the input
        for f in fams:
            f.adj(-F[f.name]["lam"], rd)
        if has_cap:
            g = _cap_grad(sp, x)
            rd -= tt[:, None] * g
        rs = {f.name: f.val(x) - F[f.name]["s"] for f in fams}
        if has_cap:
            rq = _cap_val(sp, x) - st

        dots = np.zeros(x.shape[0])
        for f in fams:
            dots += (F[f.name]["s"] * F[f.name]["lam"]).sum(axis=1)
        if has_cap:
            dots += st * tt
        mu = dots / m_total

        err = np.max(np.abs(rd), axis=1) / scale_d
        for f in fams:
            err = np.maximum(err, np.max(np.abs(rs[f.name]), axis=1)
                             / sp.scale_p)
        if has_cap:
            err = np.maximum(err, np.abs(rq) / sp.scale_p)
        err = np.maximum(err, mu / (1.0 + np.abs((cmin * x).sum(axis=1))))
        import os as _os
        if _os.environ.get("RQP_DEBUG"):
            j = 0
            bits = ["it %2d err %.3e" % (it, err[j]),
                    "rd %.2e" % (np.max(np.abs(rd), axis=1)[j] / scale_d[j]),
                    "rs %.2e" % max(float(np.max(np.abs(rs[f.name][j])))
                                    for f in fams)]
            if has_cap:
                bits.append("rq %.2e" % (abs(rq[j]) / sp.scale_p))
                bits.append("st %.1e tt %.1e" % (st[j], tt[j]))
            bits.append("mu %.2e" % mu[j])
            bits.append("ap %.2f ad %.2f" % (_dbg_ap[j], _dbg_ad[j]))
            if has_cap:
                bits.append("grd %d" % _dbg_guard[j])
            pmin, pmax, smin = np.inf, 0.0, np.inf
            fam_min = ""
            for f in fams:
                p = F[f.name]["s"][j] * F[f.name]["lam"][j]
                if p.min() < pmin:
                    pmin = p.min()
                    fam_min = f.name + str(int(np.argmin(p)))
                pmax = max(pmax, p.max())
                smin = min(smin, F[f.name]["s"][j].min())
            bits.append("p [%.1e %s, %.1e] smin %.1e" %
                        (pmin, fam_min, pmax, smin))
            print(" ".join(bits), flush=True)

        improved = err < best_err[live]
        for k in np.flatnonzero(improved):
            best_err[live[k]] = err[k]
            best[live[k]] = snapshot(k)

        # the best residual must beat where it stood a window ago by a
        # real factor; a residual cycling near a numerical floor fails
        # this while ordinary linear convergence passes easily
        slot = it % STALL_WINDOW
        done = err <= RESID_TARGET
        stalled = ~done & (best_err[live]
                           >= STALL_FACTOR * hist[live, slot])
        hist[live, slot] = best_err[live]
        drop = done | stalled
        if np.any(drop):
            for k in np.flatnonzero(done):
                record(live[k], best[live[k]], it)
            for k in np.flatnonzero(stalled):
                orig = live[k]
                if best_err[orig] > ACCEPT_RESID:
                    raise SolverFailure(
                        "structured interior point stalled (residual %.3e)"
                        % best_err[orig])
                record(orig, best[orig], it)
            keep = ~drop
            live = live[keep]
            if live.size == 0:
                break
            x = x[keep]
            cmin = cmin[keep]
            scale_d = scale_d[keep]
            for f in fams:
                F[f.name]["s"] = F[f.name]["s"][keep]
                F[f.name]["lam"] = F[f.name]["lam"][keep]
            if has_cap:
                st, tt = st[keep], tt[keep]
            continue

        wdiag_extra = np.full((x.shape[0], sp.d), sp.sigma)
        if has_cap:
            wdiag_extra += tt[:, None]
        # clamp the complementarity weights: a pinned constraint with
        # lam/s beyond W_CAP already acts as an equality, and letting the
        # ratio grow further only feeds overflow into the 2x2 eliminations
        Wd = {f.name: np.minimum(F[f.name]["lam"] / F[f.name]["s"], W_CAP)
              for f in fams}
        cond = _Condensed(sp, Wd, wdiag_extra)

        def newton(rcs, rct):
            r1 = -rd.copy()
            for f in fams:
                f.adj(-(Wd[f.name] * rs[f.name]
                        + rcs[f.name] / F[f.name]["s"]), r1)
            if has_cap:
                dx0, dx1 = cond.solve([r1, g])
                num = rct + tt * rq + tt * (g * dx0).sum(axis=1)
                den = st + tt * (g * dx1).sum(axis=1)
                dt = -num / den
                dx = dx0 + dt[:, None] * dx1
                dst = (g * dx).sum(axis=1) + rq
            else:
                dx = cond.solve([r1])[0]
                dt = np.zeros(x.shape[0])
                dst = dt
            dF = {}
            for f in fams:
                ds = f.lin(dx) + rs[f.name]
                # recover duals with the same clamped weights the condensed
                # matrix used, or the mismatch lands in the dual residual
                dlam = -rcs[f.name] / F[f.name]["s"] - Wd[f.name] * ds
                dF[f.name] = (ds, dlam)
            return dx, dF, dst, dt

        rcs = {f.name: F[f.name]["s"] * F[f.name]["lam"] for f in fams}
        rct = st * tt if has_cap else np.zeros(x.shape[0])
        dx_a, dF_a, dst_a, dt_a = newton(rcs, rct)

        a_p = np.ones(x.shape[0])
        a_d = np.ones(x.shape[0])
        for f in fams:
            a_p = np.minimum(a_p, _max_step(F[f.name]["s"], dF_a[f.name][0]))
            a_d = np.minimum(a_d, _max_step(F[f.name]["lam"],
                                            dF_a[f.name][1]))
        if has_cap:
            a_p = np.minimum(a_p, _cap_root(
                st, dst_a, 0.5 * (dx_a[:, sp.iw] ** 2).sum(axis=1)))
            a_d = np.minimum(a_d, _max_step(tt, dt_a))

        dots_aff = np.zeros(x.shape[0])
        for f in fams:
            dots_aff += ((F[f.name]["s"] + a_p[:, None] * dF_a[f.name][0])
                         * (F[f.name]["lam"]
                            + a_d[:, None] * dF_a[f.name][1])).sum(axis=1)
        if has_cap:
            dots_aff += (st + a_p * dst_a) * (tt + a_d * dt_a)
        mu_aff = dots_aff / m_total
        sig = np.where(mu > 0, (mu_aff / np.maximum(mu, 1e-300)) ** 3, 0.0)
        target = np.minimum(sig, 1.0) * mu

        rcs = {}
        for f in fams:
            ds_a, dlam_a = dF_a[f.name]
            rcs[f.name] = F[f.name]["s"] * F[f.name]["lam"] \
                + ds_a * dlam_a - target[:, None]
        rct = (st * tt + dst_a * dt_a - target) if has_cap \
            else np.zeros(x.shape[0])
        dx, dF, dst, dt = newton(rcs, rct)

        def steplengths(dx_, dF_, dst_, dt_):
            ap = np.ones(x.shape[0])
            ad = np.ones(x.shape[0])
            for f in fams:
                ap = np.minimum(ap, _max_step(F[f.name]["s"],
                                              dF_[f.name][0]))
                ad = np.minimum(ad, _max_step(F[f.name]["lam"],
                                              dF_[f.name][1]))
            if has_cap:
                ap = np.minimum(ap, _cap_root(
                    st, dst_, 0.5 * (dx_[:, sp.iw] ** 2).sum(axis=1)))
                ad = np.minimum(ad, _max_step(tt, dt_))
                # the dual residual sees x through the cap gradient, so
                # unequal primal and dual steps leak the Newton term
                # (a_d - a_p) * t * dw back into it; one shared length
                # keeps the contraction exact at the cost of pace
                ap = ad = np.minimum(ap, ad)
            return 0.995 * ap, 0.995 * ad

        a_p, a_d = steplengths(dx, dF, dst, dt)

        # centrality correctors: a single complementarity pair crashing far
        # below the others lets the path wander, so pull outlier products
        # back into a band around the trial point's own average, re-solving
        # against the same condensed matrix; keep the corrected direction
        # per task only when it lengthens the step
        for _ in range(2):
            p_trys = {}
            dots_try = np.zeros(x.shape[0])
            for f in fams:
                ds_, dlam_ = dF[f.name]
                p_trys[f.name] = (F[f.name]["s"] + a_p[:, None] * ds_) \
                    * (F[f.name]["lam"] + a_d[:, None] * dlam_)
                dots_try += p_trys[f.name].sum(axis=1)
            if has_cap:
                pt_try = (st + a_p * dst) * (tt + a_d * dt)
                dots_try += pt_try
            mu_try = np.maximum(dots_try / m_total, 1e-300)
            spread = False
            rcs2 = {}
            for f in fams:
                viol = np.clip(p_trys[f.name], 0.1 * mu_try[:, None],
                               10.0 * mu_try[:, None]) - p_trys[f.name]
                spread = spread or bool(np.any(viol != 0.0))
                rcs2[f.name] = rcs[f.name] - viol
            if has_cap:
                viol_t = np.clip(pt_try, 0.1 * mu_try, 10.0 * mu_try) \
                    - pt_try
                spread = spread or bool(np.any(viol_t != 0.0))
                rct2 = rct - viol_t
            else:
                rct2 = rct
            if not spread:
                break
            dx2, dF2, dst2, dt2 = newton(rcs2, rct2)
            a_p2, a_d2 = steplengths(dx2, dF2, dst2, dt2)
            better = a_p2 * a_d2 > a_p * a_d
            if not bool(np.any(better)):
                break
            bcol = better[:, None]
            dx = np.where(bcol, dx2, dx)
            for f in fams:
                dF[f.name] = (np.where(bcol, dF2[f.name][0], dF[f.name][0]),
                              np.where(bcol, dF2[f.name][1], dF[f.name][1]))
                rcs[f.name] = np.where(bcol, rcs2[f.name], rcs[f.name])
            if has_cap:
                dst = np.where(better, dst2, dst)
                dt = np.where(better, dt2, dt)
                rct = np.where(better, rct2, rct)
            a_p = np.where(better, a_p2, a_p)
            a_d = np.where(better, a_d2, a_d)

        _dbg_ap, _dbg_ad = a_p.copy(), a_d.copy()
        x += a_p[:, None] * dx
        for f in fams:
            F[f.name]["s"] += a_p[:, None] * dF[f.name][0]
            F[f.name]["lam"] += a_d[:, None] * dF[f.name][1]
        if has_cap:
            # exact slack, not the linearized update; _cap_root made sure
            # the new value stays positive
            st = _cap_val(sp, x)
            tt += a_d * dt

    for k in range(live.size):
        orig = live[k]
        if best_err[orig] <= ACCEPT_RESID:
            record(orig, best[orig], MAX_ITER)
        else:
            raise SolverFailure(
                "structured interior point did not converge "
                f"(residual {best_err[orig]:.2e})")
    return results
