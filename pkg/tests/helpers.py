"""Hand-built link budgets and brute-force oracles shared by the optimisation tests."""

import math

import numpy as np

from nefro.nefropt.problem import LinkBudget, shannon_se
from nefro.nefropt.solver import FunctionProblem


def two_node_budget(cross_db=-75.0, direct_db=-60.0, airtime=0.45, contend=True, noise_dbm=-95.0,
                    bandwidth=20.0, asym=0.0):
    g = np.array([[direct_db, cross_db], [cross_db + asym, direct_db]])
    return LinkBudget(
        gain_db=g, noise_dbm=noise_dbm, bandwidth_mhz=bandwidth, lte=(0, 1),
        power_dbm=np.array([23.0, 23.0]), airtime=np.array([airtime, airtime]),
        contend=np.array([[False, contend], [contend, False]]), collision_overlap=0.1,
    )


def one_node_budget(direct_db=-60.0, noise_dbm=-95.0, bandwidth=20.0):
    return LinkBudget(
        gain_db=np.array([[direct_db]]), noise_dbm=noise_dbm, bandwidth_mhz=bandwidth, lte=(0,),
        power_dbm=np.array([23.0]), airtime=np.array([1.0]), contend=np.array([[False]]),
    )


def grid_capacity_optimum(budget, capacity_of_sinr, n=2001):
    """Best total capacity over an n x n power grid (MAC airtime fixed)."""
    p = np.linspace(10.0, 23.0, n)
    P1, P2 = np.meshgrid(p, p, indexing="ij")
    g = budget.gain_db
    w = budget.overlap()
    noise = 10 ** (budget.noise_dbm / 10)
    rx = lambda i, j, P: 10 ** ((g[i, j] + P) / 10)  # noqa: E731
    s1 = 10 * np.log10(rx(0, 0, P1) / (w[0, 1] * rx(0, 1, P2) + noise))
    s2 = 10 * np.log10(rx(1, 1, P2) / (w[1, 0] * rx(1, 0, P1) + noise))
    total = capacity_of_sinr(s1, 0) + capacity_of_sinr(s2, 1)
    i = np.unravel_index(np.argmax(total), total.shape)
    return float(total[i]), (p[i[0]], p[i[1]])


def shannon_link(budget):
    a = np.asarray(budget.airtime)
    return lambda s, i: a[i] * budget.bandwidth_mhz * shannon_se(s)


def lof_oracle(points, k):
    """LOF straight from its definition, one point at a time."""
    pts = [list(map(float, p)) for p in points]
    n, d = len(pts), len(pts[0])
    # z-score each coordinate (population SD; constant columns left centred)
    for j in range(d):
        col = [p[j] for p in pts]
        mu = sum(col) / n
        sd = math.sqrt(sum((c - mu) ** 2 for c in col) / n)
        for p in pts:
            p[j] = (p[j] - mu) / (sd if sd > 0 else 1.0)

    def dist(a, b):
        return math.sqrt(sum((pts[a][j] - pts[b][j]) ** 2 for j in range(d)))

    kdist, hood = [], []
    for i in range(n):
        ds = sorted(dist(i, j) for j in range(n) if j != i)
        kd = ds[k - 1]
        kdist.append(kd)
        hood.append([j for j in range(n) if j != i and dist(i, j) <= kd])
    lrd = []
    for i in range(n):
        reach = [max(kdist[o], dist(i, o)) for o in hood[i]]
        lrd.append(len(hood[i]) / sum(reach))
    return [sum(lrd[o] for o in hood[i]) / len(hood[i]) / lrd[i] for i in range(n)]


# -- two-variable programs with a grid-search oracle ---------------------------------

N_GRID = 2001


def _grid(lo, hi):
    u = np.linspace(lo[0], hi[0], N_GRID)
    v = np.linspace(lo[1], hi[1], N_GRID)
    return np.meshgrid(u, v, indexing="ij")


def _ineq(fns):
    def g(x):
        vals = np.array([f(x)[0] for f in fns])
        jac = np.array([f(x)[1] for f in fns])
        return vals, jac
    return g


INSTANCES = {
    "concave_bowl": dict(
        f=lambda x: (5 - (x[0] - 1) ** 2 - 2 * (x[1] + 0.5) ** 2, np.array([-2 * (x[0] - 1), -4 * (x[1] + 0.5)])),
        fg=lambda X, Y: 5 - (X - 1) ** 2 - 2 * (Y + 0.5) ** 2,
        lo=[-3, -3], hi=[3, 3], g=[], gg=[],
    ),
    "linear_on_disc": dict(
        f=lambda x: (x[0] + 2 * x[1], np.array([1.0, 2.0])),
        fg=lambda X, Y: X + 2 * Y,
        lo=[-3, -3], hi=[3, 3],
        g=[lambda x: (x[0] ** 2 + x[1] ** 2 - 4, np.array([2 * x[0], 2 * x[1]]))],
        gg=[lambda X, Y: X**2 + Y**2 - 4],
    ),
    "water_filling": dict(
        f=lambda x: (math.log1p(x[0]) + math.log1p(2 * x[1]), np.array([1 / (1 + x[0]), 2 / (1 + 2 * x[1])])),
        fg=lambda X, Y: np.log1p(X) + np.log1p(2 * Y),
        lo=[0, 0], hi=[5, 5],
        g=[lambda x: (x[0] + x[1] - 3, np.array([1.0, 1.0]))],
        gg=[lambda X, Y: X + Y - 3],
    ),
    "parabola_region": dict(
        f=lambda x: (-(x[0] - 2) ** 2 - (x[1] - 1) ** 2 - 1, np.array([-2 * (x[0] - 2), -2 * (x[1] - 1)])),
        fg=lambda X, Y: -(X - 2) ** 2 - (Y - 1) ** 2 - 1,
        lo=[-2, -2], hi=[3, 3],
        g=[lambda x: (x[0] ** 2 - x[1], np.array([2 * x[0], -1.0])),
           lambda x: (x[0] + x[1] - 2, np.array([1.0, 1.0]))],
        gg=[lambda X, Y: X**2 - Y, lambda X, Y: X + Y - 2],
    ),
    "shifted_rosenbrock": dict(
        f=lambda x: (-(1 + (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2),
                     -np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)])),
        fg=lambda X, Y: -(1 + (1 - X) ** 2 + 100 * (Y - X**2) ** 2),
        lo=[-1.5, -0.5], hi=[1.5, 2.0], g=[], gg=[],
    ),
}


def instance_problem(inst):
    g = inst["g"]
    return FunctionProblem(inst["f"], inst["lo"], inst["hi"], inequalities=_ineq(g) if g else None,
                           n_in=len(g), maximize=True)


def grid_best(inst):
    """Best feasible objective over the 2001 x 2001 grid."""
    X, Y = _grid(inst["lo"], inst["hi"])
    F = inst["fg"](X, Y)
    feas = np.ones_like(F, dtype=bool)
    for gg in inst["gg"]:
        feas &= gg(X, Y) <= 0
    return float(F[feas].max())
