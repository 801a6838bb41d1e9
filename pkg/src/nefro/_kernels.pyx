# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: polynomial-ridge cross-validation and the power-control solver.

Arithmetic follows the pure-Python versions in ``_kernels_py`` and
``nefropt.solver`` step by step, so both backends agree to rounding.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, log10, log2, sqrt, fabs, INFINITY
from scipy.linalg.cython_lapack cimport dsyev

from .errors import SingularSystem

cnp.import_array()

DEF MAXD = 3
cdef double COND_LIMIT = 1e12
cdef int SPG_MEMORY = 10
cdef double SPG_GAMMA = 1e-4
cdef double STEP_MIN = 1e-10
cdef double STEP_MAX = 1e10
cdef double LN10 = 2.302585092994046
cdef double LN2 = 0.6931471805599453


# ---------------------------------------------------------------------------
# Polynomial ridge cross-validation
# ---------------------------------------------------------------------------

cdef int _ridge_small(double[:, ::1] phi, double[::1] y, long[::1] rows, int nrows, int d,
                      double alpha, double* w, double* b) except -1:
    """Centred/scaled ridge on the selected rows; mirrors ``_kernels_py.ridge_solve``."""
    cdef double mu[MAXD]
    cdef double sd[MAXD]
    cdef double a[MAXD * MAXD]
    cdef double acopy[MAXD * MAXD]
    cdef double rhs[MAXD]
    cdef double eig[MAXD]
    cdef double work[64]
    cdef double lch[MAXD * MAXD]
    cdef double tmp[MAXD]
    cdef int i, j, r, n = d, lwork = 64, info = 0
    cdef double ym = 0.0, v, xi, xj
    cdef char jobz = b'N'
    cdef char uplo = b'U'
    for j in range(d):
        v = 0.0
        for r in range(nrows):
            v += phi[rows[r], j]
        mu[j] = v / nrows
    for j in range(d):
        v = 0.0
        for r in range(nrows):
            xi = phi[rows[r], j] - mu[j]
            v += xi * xi
        v = sqrt(v / nrows)
        sd[j] = v if v > 0.0 else 1.0
    for r in range(nrows):
        ym += y[rows[r]]
    ym /= nrows
    for i in range(d):
        for j in range(d):
            v = 0.0
            for r in range(nrows):
                xi = (phi[rows[r], i] - mu[i]) / sd[i]
                xj = (phi[rows[r], j] - mu[j]) / sd[j]
                v += xi * xj
            if i == j:
                v += alpha / (sd[i] * sd[i])
            a[i * d + j] = v
        v = 0.0
        for r in range(nrows):
            xi = (phi[rows[r], i] - mu[i]) / sd[i]
            v += xi * (y[rows[r]] - ym)
        rhs[i] = v
    for i in range(d * d):
        acopy[i] = a[i]
    dsyev(&jobz, &uplo, &n, acopy, &n, eig, work, &lwork, &info)
    if info != 0 or eig[0] <= 0.0 or eig[d - 1] / eig[0] > COND_LIMIT:
        raise SingularSystem("normal equations are numerically singular")
    # Cholesky a = L L^T.
    for i in range(d):
        for j in range(i + 1):
            v = a[i * d + j]
            for r in range(j):
                v -= lch[i * d + r] * lch[j * d + r]
            if i == j:
                if v <= 0.0:
                    raise SingularSystem("normal equations are numerically singular")
                lch[i * d + i] = sqrt(v)
            else:
                lch[i * d + j] = v / lch[j * d + j]
    for i in range(d):
        v = rhs[i]
        for r in range(i):
            v -= lch[i * d + r] * tmp[r]
        tmp[i] = v / lch[i * d + i]
    for i in range(d - 1, -1, -1):
        v = tmp[i]
        for r in range(i + 1, d):
            v -= lch[r * d + i] * w[r]
        w[i] = v / lch[i * d + i]
    v = 0.0
    for i in range(d):
        w[i] = w[i] / sd[i]
        v += mu[i] * w[i]
    b[0] = ym - v
    return 0


def poly_cv_scores(x, y, int degree, double alpha, orders, int k):
    """Held-out R-squared of every fold of every run (run-major)."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=float)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=float)
    cdef long[:, ::1] ov = np.ascontiguousarray(orders, dtype=np.int64)
    cdef int runs = ov.shape[0], n = ov.shape[1]
    cdef int d = degree, r, f, i, j, lo, hi, ntrain, ntest
    if d < 1 or d > MAXD:
        raise ValueError("degree must be 1..3")
    phi_np = np.column_stack([np.asarray(xv) ** p for p in range(1, d + 1)])
    cdef double[:, ::1] phi = np.ascontiguousarray(phi_np)
    out_np = np.empty(runs * k)
    cdef double[::1] out = out_np
    bounds_np = np.full(k, n // k, dtype=np.int64)
    bounds_np[: n % k] += 1
    bounds_np = np.concatenate([[0], np.cumsum(bounds_np)]).astype(np.int64)
    cdef long[::1] bounds = bounds_np
    train_np = np.empty(n, dtype=np.int64)
    cdef long[::1] train = train_np
    cdef double w[MAXD]
    cdef double b, pred, res, ref, ss_res, ss_ref, ymean
    for r in range(runs):
        for f in range(k):
            lo = bounds[f]
            hi = bounds[f + 1]
            ntrain = 0
            for i in range(lo):
                train[ntrain] = ov[r, i]
                ntrain += 1
            for i in range(hi, n):
                train[ntrain] = ov[r, i]
                ntrain += 1
            _ridge_small(phi, yv, train, ntrain, d, alpha, w, &b)
            ymean = 0.0
            for i in range(ntrain):
                ymean += yv[train[i]]
            ymean /= ntrain
            ss_res = 0.0
            ss_ref = 0.0
            for i in range(lo, hi):
                pred = b
                for j in range(d):
                    pred += phi[ov[r, i], j] * w[j]
                res = yv[ov[r, i]] - pred
                ref = yv[ov[r, i]] - ymean
                ss_res += res * res
                ss_ref += ref * ref
            out[r * k + f] = 1.0 - ss_res / ss_ref if ss_ref > 0.0 else np.nan
    return out_np


# ---------------------------------------------------------------------------
# Power-control program family and its augmented-Lagrangian solver
# ---------------------------------------------------------------------------

cdef class _Program:
    cdef int k, n_var, n_eq, n_in, theo, max_cap, demand_mode, ia, ic, it
    cdef double[:, ::1] g_ll, w_const, var_ov, clique
    cdef double[::1] fixed_mw, a_mac, coeffs, lo, span
    cdef double noise_mw, bw, demand, fscale
    cdef double[::1] eq_scale, in_scale, lam, mu, x, gx
    cdef double[:, ::1] J, Jin, rx, terms
    cdef double[::1] h, g, den
    cdef double rho

    def __init__(self, data, lo, span):
        (self.k, self.n_var, self.n_eq, self.n_in, self.theo, self.max_cap, self.demand_mode,
         self.ia, self.ic, self.it, g_ll, fixed_mw, w_const, var_ov, a_mac, clique,
         self.noise_mw, self.bw, coeffs, self.demand, self.fscale) = data
        self.g_ll = g_ll
        self.fixed_mw = fixed_mw
        self.w_const = w_const
        self.var_ov = var_ov
        self.a_mac = a_mac
        self.clique = clique
        self.coeffs = coeffs
        self.lo = np.ascontiguousarray(lo, dtype=float)
        self.span = np.ascontiguousarray(span, dtype=float)
        self.eq_scale = np.ones(self.n_eq)
        self.in_scale = np.ones(self.n_in)
        self.lam = np.zeros(self.n_eq)
        self.mu = np.zeros(self.n_in)
        self.x = np.zeros(self.n_var)
        self.gx = np.zeros(self.n_var)
        self.J = np.zeros((max(self.n_eq, 1), self.n_var))
        self.Jin = np.zeros((max(self.n_in, 1), self.n_var))
        self.rx = np.zeros((self.k, self.k))
        self.terms = np.zeros((self.k, self.k))
        self.h = np.zeros(max(self.n_eq, 1))
        self.g = np.zeros(max(self.n_in, 1))
        self.den = np.zeros(self.k)
        self.rho = 1.0

    cdef inline double _q(self, double u):
        return self.coeffs[0] + self.coeffs[1] * u + self.coeffs[2] * u * u

    cdef inline double _qs(self, double u):
        return self.coeffs[1] + 2.0 * self.coeffs[2] * u

    cdef void to_x(self, double[::1] z):
        cdef int i
        for i in range(self.n_var):
            self.x[i] = self.lo[i] + self.span[i] * z[i]

    cdef double objective(self, double* grad):
        """Unscaled objective at ``self.x``; ``grad`` receives its gradient."""
        cdef int i
        cdef double f = 0.0
        for i in range(self.n_var):
            grad[i] = 0.0
        if self.max_cap:
            for i in range(self.k):
                f += self.x[self.ic + i]
                grad[self.ic + i] = 1.0
            return f
        grad[self.it] = 1.0
        return self.x[self.it]

    cdef void equalities(self):
        cdef int i, j, k = self.k, n = self.n_var
        cdef double w, acc, ai, se, e, s, DB = 10.0 / LN10, slope = LN10 / (10.0 * LN2)
        for i in range(self.n_eq):
            for j in range(n):
                self.J[i, j] = 0.0
        for i in range(k):
            acc = 0.0
            for j in range(k):
                self.rx[i, j] = pow(10.0, (self.g_ll[i, j] + self.x[j]) / 10.0)
                w = self.w_const[i, j]
                if self.theo:
                    w = w + self.var_ov[i, j] * self.x[self.ia + j]
                self.terms[i, j] = w * self.rx[i, j]
                acc += self.terms[i, j]
            self.den[i] = (self.fixed_mw[i] + acc) + self.noise_mw
            self.h[i] = self.x[k + i] - (self.g_ll[i, i] + self.x[i]) + 10.0 * log10(self.den[i])
            self.J[i, k + i] = 1.0
            for j in range(k):
                self.J[i, j] = self.terms[i, j] / self.den[i]
            self.J[i, i] -= 1.0
            if self.theo:
                for j in range(k):
                    self.J[i, self.ia + j] = DB * self.var_ov[i, j] * self.rx[i, j] / self.den[i]
        if self.max_cap:
            for i in range(k):
                s = self.x[k + i]
                if self.theo:
                    ai = self.x[self.ia + i]
                    e = pow(10.0, s / 10.0)
                    se = log2(1.0 + e)
                    self.h[k + i] = (self.x[self.ic + i] - ai * self.bw * se) / self.bw
                    self.J[k + i, k + i] = -ai * (slope * e / (1.0 + e))
                    self.J[k + i, self.ia + i] = -se
                else:
                    self.h[k + i] = (self.x[self.ic + i] - self._q(s)) / self.bw
                    self.J[k + i, k + i] = -self._qs(s) / self.bw
                self.J[k + i, self.ic + i] = 1.0 / self.bw

    cdef void inequalities(self):
        cdef int i, j, r = 0, k = self.k, n = self.n_var
        cdef double s, e, se, ai, acc, slope = LN10 / (10.0 * LN2)
        for i in range(self.n_in):
            for j in range(n):
                self.Jin[i, j] = 0.0
        if not self.max_cap:
            for i in range(k):
                self.g[i] = self.x[self.it] - self.x[k + i]
                self.Jin[i, self.it] = 1.0
                self.Jin[i, k + i] = -1.0
            r = k
            if self.demand_mode == 1:
                for i in range(k):
                    s = self.x[k + i]
                    ai = self.x[self.ia + i]
                    e = pow(10.0, s / 10.0)
                    se = log2(1.0 + e)
                    self.g[r + i] = (self.demand - ai * self.bw * se) / self.bw
                    self.Jin[r + i, k + i] = -ai * (slope * e / (1.0 + e))
                    self.Jin[r + i, self.ia + i] = -se
                r += k
            elif self.demand_mode == 2:
                for i in range(k):
                    s = self.x[k + i]
                    self.g[r + i] = (self.demand - self._q(s)) / self.bw
                    self.Jin[r + i, k + i] = -self._qs(s) / self.bw
                r += k
        if self.theo:
            for i in range(k):
                acc = 0.0
                for j in range(k):
                    acc += self.clique[i, j] * self.x[self.ia + j]
                    self.Jin[r + i, self.ia + j] = self.clique[i, j]
                self.g[r + i] = acc - 1.0

    cdef void set_scaling(self, double[::1] z, double max_gradient):
        cdef int i, j
        cdef double gf = 0.0, m, v
        self.to_x(z)
        self.objective(&self.gx[0])
        for i in range(self.n_var):
            v = fabs(self.gx[i] * self.span[i])
            if v > gf:
                gf = v
        if gf > 0 and (gf > max_gradient or gf < 1.0 / max_gradient):
            self.fscale = self.fscale * (1.0 / gf)
        if self.n_eq:
            self.equalities()
            for i in range(self.n_eq):
                m = 0.0
                for j in range(self.n_var):
                    v = fabs(self.J[i, j] * self.span[j])
                    if v > m:
                        m = v
                self.eq_scale[i] = 1.0 / max(1.0, m / max_gradient)
        if self.n_in:
            self.inequalities()
            for i in range(self.n_in):
                m = 0.0
                for j in range(self.n_var):
                    v = fabs(self.Jin[i, j] * self.span[j])
                    if v > m:
                        m = v
                self.in_scale[i] = 1.0 / max(1.0, m / max_gradient)

    cdef double merit(self, double[::1] z, double[::1] grad):
        cdef int i, j
        cdef double val, f, hs, sh, gs, plus, lh = 0.0, hh = 0.0, pp = 0.0, mm = 0.0
        self.to_x(z)
        f = self.objective(&self.gx[0])
        val = self.fscale * f
        for j in range(self.n_var):
            grad[j] = self.fscale * self.gx[j]
        if self.n_eq:
            self.equalities()
            for i in range(self.n_eq):
                hs = self.h[i] * self.eq_scale[i]
                lh += self.lam[i] * hs
                hh += hs * hs
                sh = self.lam[i] + self.rho * hs
                for j in range(self.n_var):
                    grad[j] += self.J[i, j] * self.eq_scale[i] * sh
            val += lh + 0.5 * self.rho * hh
        if self.n_in:
            self.inequalities()
            for i in range(self.n_in):
                gs = self.g[i] * self.in_scale[i]
                plus = self.mu[i] + self.rho * gs
                if plus < 0.0:
                    plus = 0.0
                pp += plus * plus
                mm += self.mu[i] * self.mu[i]
                for j in range(self.n_var):
                    grad[j] += self.Jin[i, j] * self.in_scale[i] * plus
            val += (pp - mm) / (2.0 * self.rho)
        for j in range(self.n_var):
            grad[j] *= self.span[j]
        return val

    cdef double violation(self, double[::1] z):
        cdef int i
        cdef double v = 0.0
        self.to_x(z)
        if self.n_eq:
            self.equalities()
            for i in range(self.n_eq):
                if fabs(self.h[i]) > v:
                    v = fabs(self.h[i])
        if self.n_in:
            self.inequalities()
            for i in range(self.n_in):
                if self.g[i] > v:
                    v = self.g[i]
        return v


cdef double _pgnorm(double[::1] z, double[::1] g, int n):
    cdef int i
    cdef double m = 0.0, t
    for i in range(n):
        t = z[i] - g[i]
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        t = fabs(t - z[i])
        if t > m:
            m = t
    return m


cdef int _spg(_Program prog, double[::1] z, double tol, int budget, double* pg_out):
    """In-place SPG on ``z``; returns the number of steps."""
    cdef int n = prog.n_var, i, steps = 0
    g_np = np.empty(n)
    gn_np = np.empty(n)
    zn_np = np.empty(n)
    d_np = np.empty(n)
    cdef double[::1] g = g_np, gn = gn_np, zn = zn_np, d = d_np
    cdef double hist[10]
    cdef double f, fn, pg, lam, gd, fmax, t, denom, tq, sy, ss, v
    f = prog.merit(z, g)
    pg = _pgnorm(z, g, n)
    lam = min(STEP_MAX, max(STEP_MIN, 1.0 / pg)) if pg > 0 else 1.0
    for i in range(SPG_MEMORY):
        hist[i] = f
    while pg > tol and steps < budget:
        gd = 0.0
        for i in range(n):
            v = z[i] - lam * g[i]
            if v < 0.0:
                v = 0.0
            elif v > 1.0:
                v = 1.0
            d[i] = v - z[i]
            gd += g[i] * d[i]
        fmax = hist[0]
        for i in range(1, SPG_MEMORY):
            if hist[i] > fmax:
                fmax = hist[i]
        t = 1.0
        while True:
            for i in range(n):
                zn[i] = z[i] + t * d[i]
            fn = prog.merit(zn, gn)
            if fn <= fmax + SPG_GAMMA * t * gd or t < 1e-12:
                break
            denom = fn - f - t * gd
            tq = -0.5 * t * t * gd / denom if denom > 0 else 0.5 * t
            t = tq if 0.1 * t <= tq <= 0.9 * t else 0.5 * t
        sy = 0.0
        ss = 0.0
        for i in range(n):
            v = zn[i] - z[i]
            sy += v * (gn[i] - g[i])
            ss += v * v
        lam = min(STEP_MAX, max(STEP_MIN, ss / sy)) if sy > 0 else STEP_MAX
        for i in range(n):
            z[i] = zn[i]
            g[i] = gn[i]
        f = fn
        hist[steps % SPG_MEMORY] = f
        steps += 1
        pg = _pgnorm(z, g, n)
    pg_out[0] = pg
    return steps


def nefro_solve(data, z0, lo, span, cfg):
    """Augmented-Lagrangian solve of one program; same outer loop as the Python solver."""
    (tol, max_iter, rho0, rho_growth, rho_max, violation_ratio, inner_tol0,
     inner_tol_decay, max_outer, max_gradient) = cfg
    cdef _Program prog = _Program(data, lo, span)
    cdef int n = prog.n_var, i, outer, steps, iters = 0
    cdef bint has_con = prog.n_eq + prog.n_in > 0, converged = False
    z_np = np.array(z0, dtype=float)
    zt_np = np.empty(n)
    cdef double[::1] z = z_np, zt = zt_np
    cdef double viol_prev = INFINITY, viol = INFINITY, pg = INFINITY, viol_new, pg_new, inner_tol
    prog.set_scaling(z, max_gradient)
    prog.rho = rho0 if has_con else 1.0
    inner_tol = inner_tol0 if has_con else tol
    history = []
    for outer in range(max_outer):
        for i in range(n):
            zt[i] = z[i]
        steps = _spg(prog, zt, inner_tol, max_iter - iters, &pg_new)
        iters += steps
        viol_new = prog.violation(zt)
        if has_con and viol_new > viol_prev and prog.rho < rho_max and iters < max_iter:
            prog.rho = min(rho_max, prog.rho * rho_growth)
            continue
        for i in range(n):
            z[i] = zt[i]
        viol = viol_new
        pg = pg_new
        history.append(viol)
        if not has_con:
            converged = pg <= tol
            break
        # prog.h / prog.g still hold the residuals at z.
        for i in range(prog.n_eq):
            prog.lam[i] = prog.lam[i] + prog.rho * prog.h[i] * prog.eq_scale[i]
        for i in range(prog.n_in):
            prog.mu[i] = max(0.0, prog.mu[i] + prog.rho * prog.g[i] * prog.in_scale[i])
        if viol <= tol and pg <= tol:
            converged = True
            break
        if iters >= max_iter:
            break
        if viol > violation_ratio * viol_prev:
            prog.rho = min(rho_max, prog.rho * rho_growth)
        viol_prev = viol
        inner_tol = max(tol, inner_tol * inner_tol_decay)
    return z_np, iters, history, viol, pg, converged
