"""Bounded-variable two-phase dense simplex with dual extraction.

Variables carry their bounds implicitly (never as rows). Every row gets a
slack turning it into an equality; the slack's bounds encode the relation:
<= gives s in [0, inf), >= gives s in (-inf, 0], = pins s at 0. Phase 1
introduces an artificial only for rows whose slack cannot absorb the
initial residual.

The core supports re-optimizing with a new objective from the current
basis (the strategies solve families of LPs over one feasible region) and
appending rows warm (the l2 epigraph masters grow by one cut at a time).
"""

import numpy as np

from . import kernels
from .problems import EQ, GE, LE, SolverFailure

_AT_LB, _AT_UB, _BASIC, _FREE = 0, 1, 2, 3

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7


class SimplexCore:
    """One feasible region; many objectives. Minimization only."""

    def __init__(self, A, rel, b, lb, ub, reserve_rows=0):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2:
            A = A.reshape(0, len(lb))
        m, n = A.shape
        self.m = m
        self.n = n
        self.rel = list(rel)
        self.b = np.asarray(b, dtype=float).copy()

        slack_lb = np.empty(m)
        slack_ub = np.empty(m)
        for j, r in enumerate(self.rel):
            if r == LE:
                slack_lb[j], slack_ub[j] = 0.0, np.inf
            elif r == GE:
                slack_lb[j], slack_ub[j] = -np.inf, 0.0
            else:
                slack_lb[j], slack_ub[j] = 0.0, 0.0

        self.lb = np.concatenate([np.asarray(lb, dtype=float), slack_lb])
        self.ub = np.concatenate([np.asarray(ub, dtype=float), slack_ub])

        # buffers sized for the initial columns plus reserved growth:
        # each appended row brings a slack and possibly an artificial
        self._cap_rows = m + reserve_rows
        cap_cols = n + m + m + 2 * reserve_rows
        self._A_buf = np.zeros((self._cap_rows, cap_cols))
        self._A_buf[:m, :n] = A
        self._A_buf[:m, n:n + m] = np.eye(m)
        self.ncols = n + m
        self._b_buf = np.zeros(self._cap_rows)
        self._b_buf[:m] = self.b
        self._lb_buf = np.full(cap_cols, -np.inf)
        self._ub_buf = np.full(cap_cols, np.inf)
        self._lb_buf[:self.ncols] = self.lb
        self._ub_buf[:self.ncols] = self.ub

        self._T_buf = np.zeros((self._cap_rows, cap_cols))
        self.basis = np.zeros(self._cap_rows, dtype=np.int64)
        self.xB = np.zeros(self._cap_rows)
        self.vstat = np.zeros(cap_cols, dtype=np.int8)
        self.xval = np.zeros(cap_cols)
        self.artificials = []
        self._have_basis = False
        self._needs_phase1 = False
        self.iterations = 0

    # -- views over the live part of the buffers ----------------------------

    @property
    def Afull(self):
        return self._A_buf[:self.m, :self.ncols]

    @property
    def T(self):
        return self._T_buf[:self.m, :self.ncols]

    def _grow(self, extra_rows, extra_cols):
        new_rows = max(self._cap_rows, self.m + extra_rows)
        new_cols = max(self._A_buf.shape[1], self.ncols + extra_cols)
        if new_rows == self._cap_rows and new_cols == self._A_buf.shape[1]:
            return
        def pad2(buf):
            out = np.zeros((new_rows, new_cols))
            out[:buf.shape[0], :buf.shape[1]] = buf
            return out
        def pad1(buf, size, fill):
            out = np.full(size, fill)
            out[:buf.shape[0]] = buf
            return out
        self._A_buf = pad2(self._A_buf)
        self._T_buf = pad2(self._T_buf)
        self._b_buf = pad1(self._b_buf, new_rows, 0.0)
        self.basis = pad1(self.basis, new_rows, 0).astype(np.int64)
        self.xB = pad1(self.xB, new_rows, 0.0)
        self._lb_buf = pad1(self._lb_buf, new_cols, -np.inf)
        self._ub_buf = pad1(self._ub_buf, new_cols, np.inf)
        self.vstat = pad1(self.vstat, new_cols, 0).astype(np.int8)
        self.xval = pad1(self.xval, new_cols, 0.0)
        self._cap_rows = new_rows

    # -- basis construction --------------------------------------------------

    def _nonbasic_start(self, j):
        lo, hi = self._lb_buf[j], self._ub_buf[j]
        if np.isfinite(lo):
            return _AT_LB, lo
        if np.isfinite(hi):
            return _AT_UB, hi
        return _FREE, 0.0

    def _init_basis(self):
        n, m = self.n, self.m
        for j in range(self.ncols):
            st, v = self._nonbasic_start(j)
            self.vstat[j] = st
            self.xval[j] = v
        resid = self._b_buf[:m] - self.Afull @ self.xval[:self.ncols]
        self.artificials = []
        scale = 1.0 + np.max(np.abs(self._b_buf[:m])) if m else 1.0
        for j in range(m):
            s_col = n + j
            s_req = self.xval[s_col] + resid[j]
            s_clamped = min(max(s_req, self._lb_buf[s_col]), self._ub_buf[s_col])
            if abs(s_req - s_clamped) <= 1e-11 * scale:
                self.vstat[s_col] = _BASIC
                self.xval[s_col] = s_req
                self.basis[j] = s_col
                self.xB[j] = s_req
            else:
                self.vstat[s_col] = (_AT_LB if s_clamped == self._lb_buf[s_col]
                                     else _AT_UB)
                self.xval[s_col] = s_clamped
                leftover = s_req - s_clamped
                a_col = self._add_artificial(j, 1.0 if leftover > 0 else -1.0)
                self.basis[j] = a_col
                self.xB[j] = abs(leftover)
                self.artificials.append(a_col)
        # initial basis matrix is diagonal +/-1, so T is Afull with rows
        # holding a negative artificial negated
        T = self.T
        T[:] = self.Afull
        for j in range(m):
            if self._A_buf[j, self.basis[j]] < 0:
                T[j] *= -1.0
        self._have_basis = True
        self._needs_phase1 = bool(self.artificials)

    def _add_artificial(self, row, coeff):
        if self.ncols >= self._A_buf.shape[1]:
            self._grow(0, 8)
        col = self.ncols
        self.ncols += 1
        self._A_buf[row, col] = coeff
        self._lb_buf[col] = 0.0
        self._ub_buf[col] = np.inf
        self.vstat[col] = _BASIC
        self.xval[col] = 0.0
        return col

    # -- the simplex loop ----------------------------------------------------

    def _optimize(self, c, bland_start=False):
        """Minimize c.x from the current feasible basis.

        Returns ("optimal", None) or ("unbounded", ray_over_columns).
        """
        m = self.m
        nc = self.ncols
        T = self.T
        lb = self._lb_buf[:nc]
        ub = self._ub_buf[:nc]
        zrow = c - (T.T @ c[self.basis[:m]] if m else 0.0)
        tol_rc = PIVOT_TOL * (1.0 + np.max(np.abs(c)) if c.size else 1.0)
        fixed = lb == ub
        bland = bland_start
        stall = 0
        stall_limit = 4 * (m + nc) + 40
        best_obj = np.inf
        max_iter = 20000 + 40 * (m + nc)

        for _ in range(max_iter):
            self.iterations += 1
            vs = self.vstat[:nc]
            score = np.zeros(nc)
            at_lb = (vs == _AT_LB) & ~fixed
            at_ub = (vs == _AT_UB) & ~fixed
            free = vs == _FREE
            score[at_lb] = -zrow[at_lb]
            score[at_ub] = zrow[at_ub]
            score[free] = np.abs(zrow[free])
            if bland:
                cand = np.flatnonzero(score > tol_rc)
                if cand.size == 0:
                    return "optimal", None
                q = int(cand[0])
            else:
                q = int(np.argmax(score))
                if score[q] <= tol_rc:
                    return "optimal", None
            if vs[q] == _AT_UB or (vs[q] == _FREE and zrow[q] > 0):
                direction = -1.0
            else:
                direction = 1.0

            col = T[:m, q]
            denom = direction * col
            t_rows = np.full(m, np.inf)
            lbB = lb[self.basis[:m]]
            ubB = ub[self.basis[:m]]
            dec = denom > PIVOT_TOL
            inc = denom < -PIVOT_TOL
            feas_lb = np.isfinite(lbB) & dec
            feas_ub = np.isfinite(ubB) & inc
            t_rows[feas_lb] = (self.xB[:m][feas_lb] - lbB[feas_lb]) / denom[feas_lb]
            t_rows[feas_ub] = (ubB[feas_ub] - self.xB[:m][feas_ub]) / (-denom[feas_ub])
            np.maximum(t_rows, 0.0, out=t_rows)
            t_min_rows = t_rows.min() if m else np.inf
            t_own = ub[q] - lb[q] if vs[q] != _FREE else np.inf

            t_star = min(t_min_rows, t_own)
            if not np.isfinite(t_star):
                ray = np.zeros(nc)
                ray[q] = direction
                if m:
                    ray[self.basis[:m]] -= direction * col
                return "unbounded", ray

            if t_star > 0:
                self.xB[:m] -= t_star * denom
                self.xval[self.basis[:m]] = self.xB[:m]
                self.xval[q] += direction * t_star

            if t_own <= t_min_rows:
                # bound flip, no basis change
                self.vstat[q] = _AT_UB if direction > 0 else _AT_LB
                self.xval[q] = ub[q] if direction > 0 else lb[q]
            else:
                ties = np.flatnonzero(t_rows <= t_star + 1e-12)
                if bland:
                    r = int(ties[np.argmin(self.basis[ties])])
                else:
                    r = int(ties[np.argmax(np.abs(denom[ties]))])
                leaving = self.basis[r]
                if denom[r] > 0:
                    self.vstat[leaving] = _AT_LB
                    self.xval[leaving] = lb[leaving]
                else:
                    self.vstat[leaving] = _AT_UB
                    self.xval[leaving] = ub[leaving]
                self.basis[r] = q
                self.vstat[q] = _BASIC
                self.xB[r] = self.xval[q]
                kernels.eliminate(self.T, zrow, r, q)

            obj = float(c @ self.xval[:nc])
            if obj < best_obj - 1e-12 * (1.0 + abs(best_obj)):
                best_obj = obj
                stall = 0
            else:
                stall += 1
                if stall > stall_limit:
                    bland = True
        raise SolverFailure("simplex iteration limit exceeded")

    # -- phases and public entry points --------------------------------------

    def _phase1(self):
        nc = self.ncols
        c1 = np.zeros(nc)
        c1[self.artificials] = 1.0
        status, _ = self._optimize(c1)
        infeas = float(c1 @ self.xval[:nc])
        scale = 1.0 + (np.max(np.abs(self.b)) if self.m else 0.0)
        if status != "optimal" or infeas > FEAS_TOL * scale:
            return False
        # freeze artificials at zero so they never carry value again
        for a in self.artificials:
            self._lb_buf[a] = 0.0
            self._ub_buf[a] = 0.0
            self.xval[a] = 0.0
        self._needs_phase1 = False
        return True

    def solve(self, c, refresh_rounds=3):
        """Minimize c over the region. Returns a result dict."""
        c = np.asarray(c, dtype=float)
        if not self._have_basis:
            self._init_basis()
        if self._needs_phase1:
            if not self._phase1():
                return {"status": "infeasible"}
        c_full = np.zeros(self.ncols)
        c_full[:self.n] = c
        bland = False
        for attempt in range(refresh_rounds):
            status, ray = self._optimize(c_full, bland_start=bland)
            if status == "unbounded":
                return {"status": "unbounded", "ray": ray[:self.n].copy()}
            result = self._certified_extract(c_full)
            if result is not None:
                return result
            # tableau drift: rebuild factors from the basis and re-polish
            self._refactor()
            bland = True
        raise SolverFailure("simplex failed to reach a certified optimum")

    def resolve(self, c):
        """Re-optimize with a new objective from the current basis."""
        return self.solve(c)

    def solve_light(self, c):
        """Minimize c and return the tableau's own view of the optimum, with
        no fresh factorization and no duals. Meant for cut-loop intermediates
        whose only job is to place the next tangent; the answer that leaves a
        loop must come from solve()."""
        c = np.asarray(c, dtype=float)
        if not self._have_basis:
            self._init_basis()
        if self._needs_phase1:
            if not self._phase1():
                return {"status": "infeasible"}
        c_full = np.zeros(self.ncols)
        c_full[:self.n] = c
        status, ray = self._optimize(c_full)
        if status == "unbounded":
            return {"status": "unbounded", "ray": ray[:self.n].copy()}
        x = self.xval[:self.ncols]
        return {"status": "optimal", "x": x[:self.n].copy(),
                "obj": float(c_full @ x), "y": None, "rc": None}

    def _refactor(self):
        m, nc = self.m, self.ncols
        if m == 0:
            return
        B = self._A_buf[:m, :nc][:, self.basis[:m]]
        try:
            self._T_buf[:m, :nc] = np.linalg.solve(B, self.Afull)
            tmp = self.xval[:nc].copy()
            tmp[self.basis[:m]] = 0.0
            self.xB[:m] = np.linalg.solve(B, self.b - self.Afull @ tmp)
            self.xval[self.basis[:m]] = self.xB[:m]
        except np.linalg.LinAlgError as exc:
            raise SolverFailure(f"singular basis during refactorization: {exc}")

    def append_row(self, coeffs, rel, rhs):
        """Add a row warm: slack basic if it absorbs the residual, else an
        artificial is activated and the next solve repairs feasibility."""
        if not self._have_basis:
            # region not factored yet; extend raw data and defer
            self._append_raw(coeffs, rel, rhs)
            return
        self._grow(1, 2)
        j = self.m
        self.m += 1
        n = self.n
        self._A_buf[j, :n] = coeffs
        self._b_buf[j] = rhs
        self.b = self._b_buf[:self.m]
        # slack column
        if self.ncols >= self._A_buf.shape[1]:
            self._grow(0, 8)
        s_col = self.ncols
        self.ncols += 1
        self._A_buf[j, s_col] = 1.0
        if rel == LE:
            slo, shi = 0.0, np.inf
        elif rel == GE:
            slo, shi = -np.inf, 0.0
        else:
            slo, shi = 0.0, 0.0
        self._lb_buf[s_col], self._ub_buf[s_col] = slo, shi
        self.rel.append(rel)
        # representation of the new row in the current basis:
        # row - row[basis_cols] applied to T of those columns
        arow = self._A_buf[j, :self.ncols]
        Told = self._T_buf[:j, :self.ncols]
        mult = self._A_buf[j, self.basis[:j]]
        self._T_buf[j, :self.ncols] = arow - (mult @ Told if j else 0.0)
        self._T_buf[:j, s_col] = 0.0
        self._T_buf[j, s_col] = 1.0
        s_req = rhs - float(self._A_buf[j, :n] @ self.xval[:n]) - float(
            self._A_buf[j, n:s_col] @ self.xval[n:s_col])
        s_clamped = min(max(s_req, slo), shi)
        scale = 1.0 + np.max(np.abs(self.b))
        if abs(s_req - s_clamped) <= 1e-11 * scale:
            self.vstat[s_col] = _BASIC
            self.xval[s_col] = s_req
            self.basis[j] = s_col
            self.xB[j] = s_req
        else:
            self.vstat[s_col] = _AT_LB if s_clamped == slo else _AT_UB
            self.xval[s_col] = s_clamped
            leftover = s_req - s_clamped
            a_col = self._add_artificial(j, 1.0 if leftover > 0 else -1.0)
            # new row's tableau must reflect the artificial basis entry
            if leftover < 0:
                self._T_buf[j, :self.ncols] *= -1.0
            self._T_buf[j, a_col] = 1.0
            self.basis[j] = a_col
            self.xB[j] = abs(leftover)
            self.artificials.append(a_col)
            self._needs_phase1 = True

    def _append_raw(self, coeffs, rel, rhs):
        self._grow(1, 2)
        j = self.m
        self.m += 1
        self._A_buf[j, :self.n] = coeffs
        self._b_buf[j] = rhs
        self.b = self._b_buf[:self.m]
        s_col = self.ncols
        self.ncols += 1
        self._A_buf[j, s_col] = 1.0
        if rel == LE:
            self._lb_buf[s_col], self._ub_buf[s_col] = 0.0, np.inf
        elif rel == GE:
            self._lb_buf[s_col], self._ub_buf[s_col] = -np.inf, 0.0
        else:
            self._lb_buf[s_col], self._ub_buf[s_col] = 0.0, 0.0
        self.rel.append(rel)

    # -- certified extraction -------------------------------------------------

    def _certified_extract(self, c_full):
        """Recompute the claimed optimum from the basis with fresh factors.

        Tableau drift cannot leak into the returned certificates; if the
        fresh reduced costs contradict optimality the caller re-optimizes.
        """
        m, nc = self.m, self.ncols
        if m == 0:
            x = self.xval[:nc].copy()
            y = np.zeros(0)
            rc = c_full.copy()
        else:
            B = self._A_buf[:m, :nc][:, self.basis[:m]]
            tmp = self.xval[:nc].copy()
            tmp[self.basis[:m]] = 0.0
            rhs = self.b - self.Afull @ tmp
            try:
                xB = np.linalg.solve(B, rhs)
                y = np.linalg.solve(B.T, c_full[self.basis[:m]])
            except np.linalg.LinAlgError:
                return None
            self.xB[:m] = xB
            x = tmp
            x[self.basis[:m]] = xB
            self.xval[:nc] = x
            rc = c_full - self.Afull.T @ y
        # fresh optimality check over nonbasic columns
        tol = 1e-8 * (1.0 + np.max(np.abs(c_full)) if c_full.size else 1.0)
        vs = self.vstat[:nc]
        lb = self._lb_buf[:nc]
        ub = self._ub_buf[:nc]
        loose = lb < ub
        bad = ((vs == _AT_LB) & loose & (rc < -tol)
               | (vs == _AT_UB) & loose & (rc > tol)
               | (vs == _FREE) & (np.abs(rc) > tol))
        if np.any(bad):
            return None
        if m:
            lbB = lb[self.basis[:m]]
            ubB = ub[self.basis[:m]]
            span = 1.0 + np.max(np.abs(self.xB[:m]))
            if (np.any(self.xB[:m] < lbB - FEAS_TOL * span)
                    or np.any(self.xB[:m] > ubB + FEAS_TOL * span)):
                return None
        return {
            "status": "optimal",
            "x": x[:self.n].copy(),
            "obj": float(c_full @ x),
            "y": (y.copy() if m else np.zeros(0)),
            "rc": rc[:self.n].copy(),
        }
