"""Paired power/airtime programs over a frozen coexistence geometry.

Each LTE node contributes a transmit power ``p`` (dBm) and an SINR ``s`` (dB)
tied together by an equality on the link budget. The THEORETICAL program
adds an airtime variable ``a`` per node and the Shannon capacity relation

    c = a * B * log2(1 + 10**(s/10))

while the LEARNED_CIR program replaces that relation with the fitted
quadratic ``c = c0 + c1*s + c2*s**2`` (Mbps, SINR in dB). The learned curve
was fitted on measured capacities that already include the channel-access
share, so airtime is not a decision variable there: it stays at the MAC
operating point.

Interference from a non-contending transmitter scales with its airtime;
contending pairs only overlap by the residual collision fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .. import coexsim as cs
from ..errors import InfeasibleBounds
from .solver import Problem

P_MIN_DBM = 10.0
P_MAX_DBM = 23.0
DEMAND_FRACTION = 0.5
RMV_FLOOR = 0.6
# Padding of the derived SINR box (dB).
SINR_MARGIN_DB = 1.0

_DB = 10.0 / math.log(10.0)  # d(10 log10 u)/du * u
_SE_SLOPE = math.log(10.0) / (10.0 * math.log(2.0))


class Objective(str, Enum):
    MAX_CAPACITY = "MAX_CAPACITY"
    MAX_SINR = "MAX_SINR"


class ConstraintKind(str, Enum):
    THEORETICAL = "THEORETICAL"
    LEARNED_CIR = "LEARNED_CIR"


class Relation(str, Enum):
    """Direction of the learned curve: capacity from SINR, or SINR from capacity."""

    CAPACITY_OF_SINR = "CAPACITY_OF_SINR"
    SINR_OF_CAPACITY = "SINR_OF_CAPACITY"


@dataclass(frozen=True)
class Cir:
    coeffs: tuple[float, float, float]
    relation: Relation = Relation.CAPACITY_OF_SINR
    # Input scale of the learned curve; SINR is always in dB.
    sinr_scale: str = "dB"

    def __post_init__(self):
        if len(self.coeffs) != 3:
            raise ValueError("learned constraint needs quadratic coefficients (c0, c1, c2)")

    def __call__(self, u):
        c0, c1, c2 = self.coeffs
        return c0 + c1 * u + c2 * u * u

    def slope(self, u):
        return self.coeffs[1] + 2.0 * self.coeffs[2] * u

    @property
    def concave(self) -> bool:
        return self.coeffs[2] < 0


@dataclass(frozen=True, eq=False)
class LinkBudget:
    """Frozen geometry: gains, noise and MAC operating point of one network."""

    gain_db: np.ndarray          # [rx, tx], foreign-link attenuation included
    noise_dbm: float
    bandwidth_mhz: float
    lte: tuple[int, ...]         # indices of power-controlled nodes
    power_dbm: np.ndarray        # transmit power of every node (LTE entries unused)
    airtime: np.ndarray          # MAC airtime of every node
    contend: np.ndarray          # symmetric bool contention graph
    collision_overlap: float = 0.1
    label: str = ""

    @property
    def n(self) -> int:
        return len(self.power_dbm)

    def overlap(self, lte_airtime=None) -> np.ndarray:
        air = np.array(self.airtime, dtype=float)
        if lte_airtime is not None:
            air[list(self.lte)] = lte_airtime
        w = np.where(self.contend, self.collision_overlap, air[None, :])
        np.fill_diagonal(w, 0.0)
        return w

    def sinr_db(self, lte_power_dbm, lte_airtime=None) -> np.ndarray:
        """SINR of the LTE links for the given LTE powers (and airtimes)."""
        p = np.array(self.power_dbm, dtype=float)
        p[list(self.lte)] = lte_power_dbm
        rx_mw = 10.0 ** ((self.gain_db + p[None, :]) / 10.0)
        w = self.overlap(lte_airtime)
        idx = list(self.lte)
        interf = (w[idx] * rx_mw[idx]).sum(axis=1)
        sig = rx_mw[idx, idx]
        return 10.0 * np.log10(sig / (interf + 10.0 ** (self.noise_dbm / 10.0)))


def link_budget(
    config: cs.ScenarioConfig,
    mac: cs.MacParams = cs.MacParams(),
    radio: cs.RadioParams = cs.RadioParams(),
) -> LinkBudget:
    """Reference-layout link budget of a scenario (no shadowing, no duty jitter)."""
    tx = cs.place_nodes(config)
    rx = cs.reference_receivers(tx, radio)
    state = cs.simulate_epoch(config, tx, mac, radio, None)
    g = cs.link_gain_db(tx, rx, config.carrier_ghz, radio)
    off = cs.interference_offsets(config, radio)
    g = g - off[None, :] * (1.0 - np.eye(config.node_count))
    return LinkBudget(
        gain_db=g,
        noise_dbm=cs.noise_floor_dbm(config.bandwidth_mhz, radio),
        bandwidth_mhz=float(config.bandwidth_mhz),
        lte=tuple(range(config.n_lte)),
        power_dbm=np.full(config.node_count, config.tx_power_dbm),
        airtime=state.airtime,
        contend=state.contend,
        collision_overlap=mac.collision_overlap,
        label=f"TS{config.scenario_id}",
    )


def shannon_se(s):
    return np.log2(1.0 + 10.0 ** (np.asarray(s, dtype=float) / 10.0))


def shannon_se_slope(s):
    e = 10.0 ** (np.asarray(s, dtype=float) / 10.0)
    return _SE_SLOPE * e / (1.0 + e)


@dataclass(eq=False)
class OptProblem(Problem):
    """One power-control program; also the :class:`Problem` consumed by the solver.

    Variable layout: ``p`` then ``s``, then ``a`` (THEORETICAL only), then ``c``
    (MAX_CAPACITY only), then ``t`` (MAX_SINR only).
    """

    objective_kind: Objective
    constraint_kind: ConstraintKind
    budget: LinkBudget
    cir: Cir | None = None
    demand_mbps: float = 0.0
    lo: np.ndarray = field(default=None, repr=False)
    hi: np.ndarray = field(default=None, repr=False)
    concave: bool = False
    demand_sinr_db: float | None = None

    def __post_init__(self):
        k = len(self.budget.lte)
        self.k = k
        self.theoretical = self.constraint_kind is ConstraintKind.THEORETICAL
        self.max_cap = self.objective_kind is Objective.MAX_CAPACITY
        off = 2 * k
        self.sl_p = slice(0, k)
        self.sl_s = slice(k, 2 * k)
        self.sl_a = slice(off, off + k) if self.theoretical else slice(off, off)
        off = self.sl_a.stop
        self.sl_c = slice(off, off + k) if self.max_cap else slice(off, off)
        off = self.sl_c.stop
        self.i_t = None if self.max_cap else off
        self.n_var = off + (0 if self.max_cap else 1)
        self.maximize = True
        bw = self.budget.bandwidth_mhz
        self.objective_scale = k * bw if self.max_cap else 10.0
        # Dependent precomputations over the fixed nodes.
        lte = list(self.budget.lte)
        self._lte = lte
        n = self.budget.n
        fixed = np.ones(n, dtype=bool)
        fixed[lte] = False
        self._fixed = fixed
        self._noise_mw = 10.0 ** (self.budget.noise_dbm / 10.0)
        g = self.budget.gain_db
        w_mac = self.budget.overlap()
        p = self.budget.power_dbm
        # Interference (mW) from non-controlled nodes: constant per LTE receiver.
        self._fixed_mw = np.array([
            float(np.sum(w_mac[i, fixed] * 10.0 ** ((g[i, fixed] + p[fixed]) / 10.0))) for i in lte
        ])
        self._g_ll = g[np.ix_(lte, lte)]             # LTE rx from LTE tx
        contend_ll = self.budget.contend[np.ix_(lte, lte)]
        self._var_overlap = (~contend_ll) & ~np.eye(k, dtype=bool) if self.theoretical else np.zeros((k, k), bool)
        w_ll = w_mac[np.ix_(lte, lte)].copy()
        w_ll[self._var_overlap] = 0.0                 # replaced by airtime variables
        self._w_const = w_ll
        self._a_mac = np.asarray(self.budget.airtime, dtype=float)[lte]
        # Airtime clique of each LTE node over controllable airtimes.
        self._clique = (contend_ll | np.eye(k, dtype=bool)).astype(float)
        self.n_eq = k + (k if self.max_cap else 0)
        n_in = 0
        if not self.max_cap:
            n_in += k                                     # t <= s_i
            if self.theoretical or self.cir.relation is Relation.CAPACITY_OF_SINR:
                n_in += k                                 # demand via relation
        if self.theoretical:
            n_in += k                                     # airtime cliques
        self.n_in = n_in
        if self.cir is not None:
            self.concave = self.cir.concave
        self._bounds()

    # ------------------------------------------------------------------ bounds

    def _bounds(self):
        k, b = self.k, self.budget
        a_hi = self._a_mac if self.theoretical else None
        s_lo = np.array([b.sinr_db(self._pvec(i, P_MIN_DBM, P_MAX_DBM), a_hi)[i] for i in range(k)])
        a_min = np.zeros(k) if self.theoretical else None
        s_hi = np.array([b.sinr_db(self._pvec(i, P_MAX_DBM, P_MIN_DBM), a_min)[i] for i in range(k)])
        s_lo -= SINR_MARGIN_DB
        s_hi += SINR_MARGIN_DB
        if self.demand_sinr_db is not None:
            s_lo = np.maximum(s_lo, self.demand_sinr_db)
        if np.any(s_lo > s_hi):
            raise InfeasibleBounds("demanded SINR exceeds what the link budget allows")
        lo = np.empty(self.n_var)
        hi = np.empty(self.n_var)
        lo[self.sl_p], hi[self.sl_p] = P_MIN_DBM, P_MAX_DBM
        lo[self.sl_s], hi[self.sl_s] = s_lo, s_hi
        if self.theoretical:
            lo[self.sl_a], hi[self.sl_a] = 0.0, self._a_mac
            if np.any(self._a_mac <= 0):
                raise InfeasibleBounds("a node has no channel access")
        if self.max_cap:
            c_at = np.concatenate([self._capacity(s_lo, self._a_mac), self._capacity(s_hi, self._a_mac)])
            grid = np.linspace(s_lo.min(), s_hi.max(), 64)
            c_at = np.concatenate([c_at, self._capacity(grid, self._a_mac.max())])
            lo[self.sl_c] = min(0.0, float(c_at.min()))
            hi[self.sl_c] = 1.1 * float(c_at.max()) + 1.0
        if self.i_t is not None:
            lo[self.i_t], hi[self.i_t] = s_lo.min(), s_hi.max()
        self.lo, self.hi = lo, hi

    def _pvec(self, i, own, others):
        p = np.full(self.k, others)
        p[i] = own
        return p

    def _capacity(self, s, a):
        if self.theoretical:
            return a * self.budget.bandwidth_mhz * shannon_se(s)
        return self.cir(np.asarray(s, dtype=float))

    # --------------------------------------------------------------- functions

    def objective(self, x):
        grad = np.zeros(self.n_var)
        if self.max_cap:
            grad[self.sl_c] = 1.0
            return float(np.sum(x[self.sl_c])), grad
        grad[self.i_t] = 1.0
        return float(x[self.i_t]), grad

    def _interference(self, p, a):
        """Interference (mW) at each LTE receiver and its power/airtime weights."""
        rx = 10.0 ** ((self._g_ll + p[None, :]) / 10.0)
        w = self._w_const.copy()
        if self.theoretical:
            w = w + self._var_overlap * a[None, :]
        terms = w * rx
        return self._fixed_mw + terms.sum(axis=1), terms, rx

    def equalities(self, x):
        k, bw = self.k, self.budget.bandwidth_mhz
        p, s = x[self.sl_p], x[self.sl_s]
        a = x[self.sl_a] if self.theoretical else self._a_mac
        tot, terms, rx = self._interference(p, a)
        den = tot + self._noise_mw
        sig_db = np.diag(self._g_ll) + p
        h = [s - sig_db + 10.0 * np.log10(den)]
        J = np.zeros((self.n_eq, self.n_var))
        rows = np.arange(k)
        J[rows, self.sl_s.start + rows] = 1.0
        J[:k, self.sl_p] = terms / den[:, None]
        J[rows, rows] -= 1.0
        if self.theoretical:
            J[:k, self.sl_a] = _DB * self._var_overlap * rx / den[:, None]
        if self.max_cap:
            c = x[self.sl_c]
            if self.theoretical:
                se = shannon_se(s)
                h.append((c - a * bw * se) / bw)
                J[k + rows, self.sl_s.start + rows] = -a * shannon_se_slope(s)
                J[k + rows, self.sl_a.start + rows] = -se
            else:
                h.append((c - self.cir(s)) / bw)
                J[k + rows, self.sl_s.start + rows] = -self.cir.slope(s) / bw
            J[k + rows, self.sl_c.start + rows] = 1.0 / bw
        return np.concatenate(h), J

    def inequalities(self, x):
        k, bw = self.k, self.budget.bandwidth_mhz
        s = x[self.sl_s]
        g = []
        J = np.zeros((self.n_in, self.n_var))
        rows = np.arange(k)
        r = 0
        if not self.max_cap:
            g.append(x[self.i_t] - s)
            J[rows, self.i_t] = 1.0
            J[rows, self.sl_s.start + rows] = -1.0
            r = k
            if self.theoretical:
                a = x[self.sl_a]
                g.append((self.demand_mbps - a * bw * shannon_se(s)) / bw)
                J[r + rows, self.sl_s.start + rows] = -a * shannon_se_slope(s)
                J[r + rows, self.sl_a.start + rows] = -shannon_se(s)
                r += k
            elif self.cir.relation is Relation.CAPACITY_OF_SINR:
                g.append((self.demand_mbps - self.cir(s)) / bw)
                J[r + rows, self.sl_s.start + rows] = -self.cir.slope(s) / bw
                r += k
        if self.theoretical:
            a = x[self.sl_a]
            g.append(self._clique @ a - 1.0)
            J[r:r + k, self.sl_a] = self._clique
        return np.concatenate(g) if g else np.zeros(0), J

    def kernel_data(self) -> tuple:
        """Flat description of this program for the compiled solver."""
        if self.max_cap:
            demand_mode = 0
        elif self.theoretical:
            demand_mode = 1
        elif self.cir.relation is Relation.CAPACITY_OF_SINR:
            demand_mode = 2
        else:
            demand_mode = 3
        coeffs = np.zeros(3) if self.cir is None else np.asarray(self.cir.coeffs, dtype=float)
        f = np.ascontiguousarray
        return (
            self.k, self.n_var, self.n_eq, self.n_in, int(self.theoretical), int(self.max_cap),
            demand_mode, self.sl_a.start, self.sl_c.start, -1 if self.i_t is None else self.i_t,
            f(self._g_ll, dtype=float), f(self._fixed_mw, dtype=float), f(self._w_const, dtype=float),
            f(self._var_overlap, dtype=float), f(self._a_mac, dtype=float), f(self._clique, dtype=float),
            float(self._noise_mw), float(self.budget.bandwidth_mhz), f(coeffs), float(self.demand_mbps),
            -1.0 / self.objective_scale,
        )

    # ----------------------------------------------------------- bookkeeping

    def constraint_flops(self) -> int:
        """Operation count of one evaluation of the capacity-relation constraints.

        Additions and multiplications count 1; ``exp``/``log`` count
        :data:`TRANSCENDENTAL_FLOPS`.
        """
        k = self.k
        if self.theoretical:
            # 10**(s/10): mul + exp; 1 + e; log2: log + mul; a*B*se: 2 mul; residual: sub + div.
            per = 1 + TRANSCENDENTAL_FLOPS + 1 + TRANSCENDENTAL_FLOPS + 1 + 2 + 2
        elif self.cir.relation is Relation.CAPACITY_OF_SINR:
            # Horner c0 + s*(c1 + s*c2): 2 mul + 2 add; residual: sub + div.
            per = 4 + 2
        else:
            per = 0  # folded into the SINR bound
        n_rel = k if (self.max_cap or self.theoretical or self.cir.relation is Relation.CAPACITY_OF_SINR) else 0
        return n_rel * per

    def describe(self) -> dict:
        return {
            "objective": self.objective_kind.value,
            "constraint_kind": self.constraint_kind.value,
            "n_var": self.n_var,
            "n_eq": self.n_eq,
            "n_in": self.n_in,
            "cir_coeffs": None if self.cir is None else list(self.cir.coeffs),
            "cir_relation": None if self.cir is None else self.cir.relation.value,
            "sinr_scale": "dB",
            "concave": self.concave,
            "demand_mbps": self.demand_mbps,
        }


TRANSCENDENTAL_FLOPS = 20


def reference_capacity(budget: LinkBudget) -> np.ndarray:
    """Shannon capacity of each LTE link with every node at full power."""
    s = budget.sinr_db(np.full(len(budget.lte), P_MAX_DBM))
    a = np.asarray(budget.airtime)[list(budget.lte)]
    return a * budget.bandwidth_mhz * shannon_se(s)


def demand_floor(budget: LinkBudget, fraction: float = DEMAND_FRACTION) -> float:
    return fraction * float(reference_capacity(budget).min())


def build_problem(
    scenario,
    objective: Objective,
    constraint_kind: ConstraintKind,
    cir: Cir | None = None,
    demand_mbps: float | None = None,
    mac: cs.MacParams = cs.MacParams(),
    radio: cs.RadioParams = cs.RadioParams(),
) -> OptProblem:
    """Program for a scenario config or a prepared :class:`LinkBudget`."""
    budget = scenario if isinstance(scenario, LinkBudget) else link_budget(scenario, mac, radio)
    objective = Objective(objective)
    constraint_kind = ConstraintKind(constraint_kind)
    if not budget.lte:
        raise InfeasibleBounds("no power-controlled node")
    if constraint_kind is ConstraintKind.LEARNED_CIR:
        if cir is None:
            raise ValueError("LEARNED_CIR needs quadratic coefficients")
        if objective is Objective.MAX_CAPACITY and cir.relation is not Relation.CAPACITY_OF_SINR:
            raise ValueError("capacity objective needs a capacity-from-SINR curve")
    demand = demand_floor(budget) if demand_mbps is None else float(demand_mbps)
    demand_sinr = None
    if (objective is Objective.MAX_SINR and constraint_kind is ConstraintKind.LEARNED_CIR
            and cir.relation is Relation.SINR_OF_CAPACITY):
        demand_sinr = float(cir(demand))
    return OptProblem(objective, constraint_kind, budget, cir, demand, demand_sinr_db=demand_sinr)


def constraint_select(nfr, theoretical=None, rmv_floor: float = RMV_FLOOR) -> ConstraintKind:
    """Admit a learned relation only if it is at most quadratic and fits well enough.

    ``nfr`` is a selection report (anything with ``chosen_degree`` and
    ``chosen_metrics.rmv_cv_mean``). ``theoretical`` is accepted for symmetry
    with the selector's interface; the theoretical relation is always the
    fallback.
    """
    m = nfr.chosen_metrics
    rmv = m.rmv_cv_mean if m.rmv_cv_mean is not None else m.rmv
    if nfr.chosen_degree <= 2 and rmv >= rmv_floor:
        return ConstraintKind.LEARNED_CIR
    return ConstraintKind.THEORETICAL
