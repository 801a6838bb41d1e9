"""Box-constrained augmented-Lagrangian solver with a spectral projected-gradient inner loop.

Problems expose finite variable bounds, an objective and optional equality
(``h(x) = 0``) and inequality (``g(x) <= 0``) constraints, each returning values
together with derivatives. The solver runs in bound-normalised coordinates
``z = (x - lo) / (hi - lo)`` so that every variable lives in [0, 1].
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import InfeasibleBounds

# Nonmonotone line-search memory and sufficient-decrease constant.
SPG_MEMORY = 10
SPG_GAMMA = 1e-4
STEP_MIN, STEP_MAX = 1e-10, 1e10


@dataclass(frozen=True)
class SolverConfig:
    tolerance: float = 1e-6
    max_iter: int = 10000
    rho0: float = 0.1
    rho_growth: float = 3.0
    rho_max: float = 1e10
    # Penalty grows unless violation shrinks at least by this factor.
    violation_ratio: float = 0.5
    inner_tol0: float = 1e-1
    inner_tol_decay: float = 0.1
    max_outer: int = 60
    max_gradient: float = 1.0

    def __post_init__(self):
        if self.tolerance <= 0 or self.max_iter < 1:
            raise ValueError("tolerance must be positive and max_iter >= 1")


@dataclass(frozen=True, eq=False)
class SolveResult:
    optimal_value: float
    iterations: int
    wall_time_ms: float
    converged: bool
    kkt_residual: float
    x: np.ndarray = field(repr=False, default=None)
    violation_history: tuple[float, ...] = ()
    status: str = "ok"

    def to_dict(self) -> dict:
        return {
            "optimal_value": self.optimal_value,
            "iterations": self.iterations,
            "wall_time_ms": self.wall_time_ms,
            "converged": self.converged,
            "kkt_residual": self.kkt_residual,
            "status": self.status,
        }


class Problem:
    """Interface consumed by :func:`solve`. Subclasses override what they need."""

    maximize: bool = False
    # Internal objective scale; the reported value is unscaled.
    objective_scale: float = 1.0
    n_eq: int = 0
    n_in: int = 0

    lo: np.ndarray
    hi: np.ndarray

    def objective(self, x: np.ndarray) -> tuple[float, np.ndarray]:
        raise NotImplementedError

    def equalities(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(0), np.zeros((0, len(x)))

    def inequalities(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return np.zeros(0), np.zeros((0, len(x)))


class FunctionProblem(Problem):
    """Problem assembled from plain callables (handy for small instances and tests)."""

    def __init__(self, objective, lo, hi, equalities=None, inequalities=None,
                 n_eq=0, n_in=0, maximize=False):
        self._f, self._h, self._g = objective, equalities, inequalities
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.n_eq, self.n_in, self.maximize = n_eq, n_in, maximize

    def objective(self, x):
        return self._f(x)

    def equalities(self, x):
        return self._h(x) if self._h else super().equalities(x)

    def inequalities(self, x):
        return self._g(x) if self._g else super().inequalities(x)


class _Scaled:
    """Augmented Lagrangian of a problem in normalised coordinates."""

    def __init__(self, problem: Problem):
        self.p = problem
        self.lo = np.asarray(problem.lo, dtype=float)
        self.span = np.asarray(problem.hi, dtype=float) - self.lo
        self.sign = -1.0 if problem.maximize else 1.0
        self.fscale = self.sign / problem.objective_scale
        self.lam = np.zeros(problem.n_eq)
        self.mu = np.zeros(problem.n_in)
        self.rho = 1.0
        self.eq_scale = np.ones(problem.n_eq)
        self.in_scale = np.ones(problem.n_in)

    def set_scaling(self, z, max_gradient):
        """Gradient-based scaling at the start point: no row steeper than ``max_gradient``."""
        x = self.x(z)
        gf = np.abs(np.asarray(self.p.objective(x)[1], dtype=float) * self.span).max(initial=0.0)
        if gf > 0:
            self.fscale *= 1.0 / gf if gf > max_gradient or gf < 1.0 / max_gradient else 1.0
        if self.p.n_eq:
            jn = np.abs(self.p.equalities(x)[1] * self.span).max(axis=1)
            self.eq_scale = 1.0 / np.maximum(1.0, jn / max_gradient)
        if self.p.n_in:
            jn = np.abs(self.p.inequalities(x)[1] * self.span).max(axis=1)
            self.in_scale = 1.0 / np.maximum(1.0, jn / max_gradient)

    def x(self, z):
        return self.lo + self.span * z

    def merit(self, z):
        x = self.x(z)
        f, gf = self.p.objective(x)
        val = self.fscale * f
        grad = self.fscale * np.asarray(gf, dtype=float)
        if self.p.n_eq:
            h, jh = self.p.equalities(x)
            h = h * self.eq_scale
            jh = jh * self.eq_scale[:, None]
            shifted = self.lam + self.rho * h
            val += float(self.lam @ h) + 0.5 * self.rho * float(h @ h)
            grad = grad + jh.T @ shifted
        if self.p.n_in:
            g, jg = self.p.inequalities(x)
            g = g * self.in_scale
            jg = jg * self.in_scale[:, None]
            plus = np.maximum(0.0, self.mu + self.rho * g)
            val += float(plus @ plus - self.mu @ self.mu) / (2.0 * self.rho)
            grad = grad + jg.T @ plus
        return val, grad * self.span

    def residuals(self, z):
        """Unscaled constraint values (used for the violation test)."""
        x = self.x(z)
        h = self.p.equalities(x)[0] if self.p.n_eq else np.zeros(0)
        g = self.p.inequalities(x)[0] if self.p.n_in else np.zeros(0)
        return h, g


def _violation(h, g) -> float:
    v = float(np.max(np.abs(h))) if len(h) else 0.0
    if len(g):
        v = max(v, float(np.max(g)))
    return max(v, 0.0)


def _proj_grad_norm(z, g) -> float:
    return float(np.max(np.abs(np.clip(z - g, 0.0, 1.0) - z))) if len(z) else 0.0


def spg(fun, z, tol, budget):
    """Nonmonotone spectral projected gradient on the unit box.

    Returns ``(z, steps, projected_gradient_norm)``.
    """
    f, g = fun(z)
    pg = _proj_grad_norm(z, g)
    lam = min(STEP_MAX, max(STEP_MIN, 1.0 / pg)) if pg > 0 else 1.0
    hist = [f] * SPG_MEMORY
    steps = 0
    while pg > tol and steps < budget:
        d = np.clip(z - lam * g, 0.0, 1.0) - z
        gd = float(g @ d)
        fmax = max(hist)
        t = 1.0
        while True:
            zn = z + t * d
            fn, gn = fun(zn)
            if fn <= fmax + SPG_GAMMA * t * gd or t < 1e-12:
                break
            denom = fn - f - t * gd
            tq = -0.5 * t * t * gd / denom if denom > 0 else 0.5 * t
            t = tq if 0.1 * t <= tq <= 0.9 * t else 0.5 * t
        s = zn - z
        y = gn - g
        sy = float(s @ y)
        lam = min(STEP_MAX, max(STEP_MIN, float(s @ s) / sy)) if sy > 0 else STEP_MAX
        z, f, g = zn, fn, gn
        hist[steps % SPG_MEMORY] = f
        steps += 1
        pg = _proj_grad_norm(z, g)
    return z, steps, pg


def _al_loop(sc: _Scaled, z: np.ndarray, cfg: SolverConfig, has_con: bool):
    """Outer loop shared by every problem handled in Python."""
    sc.set_scaling(z, cfg.max_gradient)
    sc.rho = cfg.rho0 if has_con else 1.0
    inner_tol = cfg.inner_tol0 if has_con else cfg.tolerance
    iters = 0
    history: list[float] = []
    viol_prev = math.inf
    viol = pg = math.inf
    converged = False
    for _ in range(cfg.max_outer):
        z_new, k, pg_new = spg(sc.merit, z, inner_tol, cfg.max_iter - iters)
        iters += k
        h, g = sc.residuals(z_new)
        viol_new = _violation(h, g)
        if has_con and viol_new > viol_prev and sc.rho < cfg.rho_max and iters < cfg.max_iter:
            sc.rho = min(cfg.rho_max, sc.rho * cfg.rho_growth)
            continue
        z, viol, pg = z_new, viol_new, pg_new
        history.append(viol)
        if not has_con:
            converged = pg <= cfg.tolerance
            break
        sc.lam = sc.lam + sc.rho * h * sc.eq_scale
        sc.mu = np.maximum(0.0, sc.mu + sc.rho * g * sc.in_scale)
        if viol <= cfg.tolerance and pg <= cfg.tolerance:
            converged = True
            break
        if iters >= cfg.max_iter:
            break
        if viol > cfg.violation_ratio * viol_prev:
            sc.rho = min(cfg.rho_max, sc.rho * cfg.rho_growth)
        viol_prev = viol
        inner_tol = max(cfg.tolerance, inner_tol * cfg.inner_tol_decay)
    return z, iters, history, viol, pg, converged


def solve(problem: Problem, cfg: SolverConfig = SolverConfig(), x0=None, backend: str | None = None) -> SolveResult:
    """Maximise or minimise ``problem`` from the bound midpoints (or ``x0``).

    Converged means constraint violation and projected Lagrangian gradient are
    both below ``cfg.tolerance``. A violation that grows between outer
    iterations is rejected: the penalty is raised and the subproblem re-solved
    from the last accepted point, so the accepted history is non-increasing.

    Problems that provide ``kernel_data()`` run in the compiled kernel when it
    is available (``backend`` = ``"compiled"``/``"python"`` overrides).
    """
    t0 = time.perf_counter()
    lo = np.asarray(problem.lo, dtype=float)
    span = np.asarray(problem.hi, dtype=float) - lo
    if np.any(span < 0):
        raise InfeasibleBounds("variable bounds are empty")
    span = np.where(span <= 0, 0.0, span)
    z0 = np.full(len(lo), 0.5) if x0 is None else np.clip(
        (np.asarray(x0, float) - lo) / np.where(span > 0, span, 1.0), 0.0, 1.0)
    has_con = problem.n_eq + problem.n_in > 0
    kern = _pick_kernel(problem, backend)
    if kern is not None:
        z, iters, history, viol, pg, converged = kern.nefro_solve(
            problem.kernel_data(), z0, lo, span, _cfg_tuple(cfg))
        history = list(history)
    else:
        sc = _Scaled(problem)
        sc.span = span
        z, iters, history, viol, pg, converged = _al_loop(sc, z0, cfg, has_con)
    x = lo + span * z
    value = float(problem.objective(x)[0])
    kkt = max(viol, pg)
    return SolveResult(
        optimal_value=value,
        iterations=int(iters),
        wall_time_ms=1e3 * (time.perf_counter() - t0),
        converged=bool(converged and kkt < cfg.tolerance),
        kkt_residual=float(kkt),
        x=x,
        violation_history=tuple(float(v) for v in history),
        status="ok" if converged else "max_iter",
    )


def _cfg_tuple(cfg: SolverConfig) -> tuple:
    return (cfg.tolerance, cfg.max_iter, cfg.rho0, cfg.rho_growth, cfg.rho_max,
            cfg.violation_ratio, cfg.inner_tol0, cfg.inner_tol_decay, cfg.max_outer,
            cfg.max_gradient)


def _pick_kernel(problem: Problem, backend: str | None):
    if not hasattr(problem, "kernel_data"):
        return None
    from .._backend import NAME, compiled_kernels

    want = backend or NAME
    if want == "compiled":
        if compiled_kernels is None:
            raise RuntimeError("compiled kernels are not built")
        return compiled_kernels
    return None
