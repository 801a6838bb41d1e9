"""MAC-abstraction generator of (SINR, capacity) feature points.

The generator emulates a dense indoor LTE-U/LAA + Wi-Fi deployment in the 5 GHz
band. Node geometry is frozen per scenario; every sample is one measurement
epoch with redrawn shadowing, UE placement and LTE-U duty-cycle jitter.

Channel access is abstracted rather than simulated slot by slot:

* LAA defers to any transmitter heard above its energy-detection threshold.
* Wi-Fi defers to Wi-Fi above the preamble threshold and to LTE above the
  energy-detection threshold.
* LTE-U never senses; CSAT gives it a fixed ON fraction whenever Wi-Fi is
  present in the deployment.

Sensing nodes split the residual airtime equally among their contenders.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, fields, replace
from enum import Enum
from itertools import product
from pathlib import Path

import numpy as np

from .errors import PlacementInfeasible

BANDWIDTHS_MHZ = (5, 10, 15, 20)
SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_HZ = -174.0

# SeedSequence spawn-key prefixes; one independent stream per purpose.
_GEOMETRY_STREAM = 1
_EPOCH_STREAM = 2
_CONTAMINATION_STREAM = 3

CSV_HEADER = (
    "scenario_id",
    "lte_variant",
    "wifi_variant",
    "bandwidth_mhz",
    "predictor",
    "sample_index",
    "sinr_db",
    "capacity_mbps",
)


class LteVariant(str, Enum):
    LTE_U = "LTE_U"
    LAA = "LAA"


class WifiVariant(str, Enum):
    IEEE80211N = "IEEE80211N"
    IEEE80211AC = "IEEE80211AC"


class Predictor(str, Enum):
    SINR = "SINR"
    CAPACITY = "CAPACITY"


@dataclass(frozen=True)
class ScenarioConfig:
    """One test scenario: LTE variant x Wi-Fi variant x bandwidth x predictor."""

    lte_variant: LteVariant
    wifi_variant: WifiVariant
    bandwidth_mhz: int
    predictor: Predictor
    node_count: int = 6
    tx_power_dbm: float = 23.0
    carrier_ghz: float = 5.0
    inter_node_min_m: float = 5.0
    inter_node_max_m: float = 10.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "lte_variant", LteVariant(self.lte_variant))
        object.__setattr__(self, "wifi_variant", WifiVariant(self.wifi_variant))
        object.__setattr__(self, "predictor", Predictor(self.predictor))
        if self.bandwidth_mhz not in BANDWIDTHS_MHZ:
            raise ValueError(f"bandwidth_mhz must be one of {BANDWIDTHS_MHZ}")
        if self.node_count < 2:
            raise ValueError("node_count must be >= 2")
        if self.inter_node_min_m > self.inter_node_max_m:
            raise ValueError("inter_node_min_m must not exceed inter_node_max_m")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def scenario_id(self) -> int:
        """Position (1..32) in the canonical scenario enumeration."""
        idx = _SCENARIO_AXES.index(
            (self.lte_variant, self.wifi_variant, self.bandwidth_mhz, self.predictor)
        )
        return idx + 1

    @property
    def network_key(self) -> tuple[int, int, int]:
        # Predictor twins describe the same experiment, so they share random streams.
        return (
            list(LteVariant).index(self.lte_variant),
            list(WifiVariant).index(self.wifi_variant),
            self.bandwidth_mhz,
        )

    @property
    def n_lte(self) -> int:
        return max(1, self.node_count // 2)

    def roles(self) -> list[str]:
        """Per-node access technology: the LTE variant name or ``"WIFI"``."""
        lte = self.lte_variant.value
        return [lte if i < self.n_lte else "WIFI" for i in range(self.node_count)]

    def twin(self) -> "ScenarioConfig":
        other = Predictor.CAPACITY if self.predictor is Predictor.SINR else Predictor.SINR
        return replace(self, predictor=other)

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("lte_variant", "wifi_variant", "predictor"):
            d[key] = d[key].value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


_SCENARIO_AXES = list(product(LteVariant, WifiVariant, BANDWIDTHS_MHZ, Predictor))


def all_scenarios(seed: int = 0, **overrides) -> list[ScenarioConfig]:
    """The 32 test scenarios ordered by scenario id."""
    return [
        ScenarioConfig(lte, wifi, bw, pred, seed=seed, **overrides)
        for lte, wifi, bw, pred in _SCENARIO_AXES
    ]


def scenario_by_id(scenario_id: int, seed: int = 0, **overrides) -> ScenarioConfig:
    if not 1 <= scenario_id <= len(_SCENARIO_AXES):
        raise ValueError(f"scenario id must be in 1..{len(_SCENARIO_AXES)}")
    lte, wifi, bw, pred = _SCENARIO_AXES[scenario_id - 1]
    return ScenarioConfig(lte, wifi, bw, pred, seed=seed, **overrides)


@dataclass(frozen=True)
class MacParams:
    """Channel-access thresholds and LBT/CSAT timing."""

    laa_ed_dbm: float = -72.0
    wifi_ed_dbm: float = -62.0
    wifi_preamble_dbm: float = -82.0
    laa_txop_ms: float = 8.0
    lteu_duty_on_fraction: float = 0.5
    slot_ms: float = 0.009
    lteu_duty_jitter: float = 0.1
    lbt_backoff_slots: float = 7.5
    # Conditional probability that two contending LBT nodes still collide.
    collision_overlap: float = 0.1

    def __post_init__(self):
        if self.laa_txop_ms <= 0:
            raise ValueError("laa_txop_ms must be positive")
        if not 0 < self.lteu_duty_on_fraction <= 1:
            raise ValueError("lteu_duty_on_fraction must be in (0, 1]")
        if self.lteu_duty_jitter < 0 or self.slot_ms < 0:
            raise ValueError("jitter and slot duration must be non-negative")

    @property
    def lbt_efficiency(self) -> float:
        overhead = self.slot_ms * self.lbt_backoff_slots
        return self.laa_txop_ms / (self.laa_txop_ms + overhead)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "MacParams":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass(frozen=True)
class RadioParams:
    """Propagation and measurement model of the generator."""

    path_loss_exponent: float = 3.5
    shadowing_db: float = 4.0
    lteu_dispersion: float = 1.5
    noise_figure_db: float = 9.0
    ue_min_m: float = 1.0
    ue_max_m: float = 4.0
    ac_interference_offset_db: float = 3.0
    wifi_se_cap_n: float = 6.0
    wifi_se_cap_ac: float = 8.0
    # Capacity measurement noise, in bit/s/Hz of the airtime-scaled link.
    capacity_noise_se: float = 0.25
    # Links below this SINR are not decodable and yield no measurement; the
    # UE is redrawn (at most ``max_redraws`` times).
    decode_floor_db: float = -10.0
    max_redraws: int = 50

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RadioParams":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def _quadratic_truth_coeffs(lo: float = -10.0, hi: float = 30.0) -> np.ndarray:
    """Least-squares quadratic of Shannon spectral efficiency over [lo, hi] dB.

    The fit passes through the Shannon value at ``lo`` so the curve stays
    positive and increasing across the decodable range.
    """
    grid = np.linspace(lo, hi, 4001)
    se = np.log2(1.0 + 10.0 ** (grid / 10.0))
    se_lo = se[0]
    u = grid - lo
    (b1, b2), *_ = np.linalg.lstsq(np.column_stack([u, u * u]), se - se_lo, rcond=None)
    return np.array([se_lo - b1 * lo + b2 * lo * lo, b1 - 2.0 * b2 * lo, b2])


# Spectral efficiency (bit/s/Hz) vs SINR in dB: coefficients (c0, c1, c2).
QUADRATIC_TRUTH = _quadratic_truth_coeffs()


@dataclass(frozen=True)
class FeaturePoint:
    sinr_db: float
    capacity_mbps: float
    scenario_id: int
    sample_index: int


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature points of one scenario, stored column-wise."""

    config: ScenarioConfig
    sinr_db: np.ndarray
    capacity_mbps: np.ndarray
    sample_index: np.ndarray | None = None
    airtime: np.ndarray | None = None
    injected: np.ndarray | None = None

    def __post_init__(self):
        s = np.asarray(self.sinr_db, dtype=float)
        c = np.asarray(self.capacity_mbps, dtype=float)
        if s.shape != c.shape or s.ndim != 1:
            raise ValueError("sinr_db and capacity_mbps must be 1-D and equal length")
        if not np.all(np.isfinite(s)):
            raise ValueError("sinr_db must be finite")
        if np.any(c < 0):
            raise ValueError("capacity_mbps must be non-negative")
        object.__setattr__(self, "sinr_db", s)
        object.__setattr__(self, "capacity_mbps", c)
        idx = np.arange(len(s)) if self.sample_index is None else np.asarray(self.sample_index)
        object.__setattr__(self, "sample_index", idx.astype(int))

    @property
    def N(self) -> int:
        return len(self.sinr_db)

    @property
    def D(self) -> int:
        return 1

    @property
    def points(self) -> list[FeaturePoint]:
        sid = self.config.scenario_id
        return [
            FeaturePoint(float(s), float(c), sid, int(k))
            for s, c, k in zip(self.sinr_db, self.capacity_mbps, self.sample_index)
        ]

    def xy(self, predictor: Predictor | str | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Return (predictor, response) columns for the requested direction."""
        pred = Predictor(predictor) if predictor is not None else self.config.predictor
        if pred is Predictor.SINR:
            return self.sinr_db, self.capacity_mbps
        return self.capacity_mbps, self.sinr_db

    def subset(self, mask: np.ndarray) -> "Dataset":
        mask = np.asarray(mask, dtype=bool)
        pick = lambda a: None if a is None else a[mask]
        return Dataset(
            self.config,
            self.sinr_db[mask],
            self.capacity_mbps[mask],
            self.sample_index[mask],
            pick(self.airtime),
            pick(self.injected),
        )

    def with_config(self, config: ScenarioConfig) -> "Dataset":
        return replace(self, config=config)

    def to_csv(self) -> str:
        cfg = self.config
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for s, c, k in zip(self.sinr_db, self.capacity_mbps, self.sample_index):
            writer.writerow([
                cfg.scenario_id,
                cfg.lte_variant.value,
                cfg.wifi_variant.value,
                cfg.bandwidth_mhz,
                cfg.predictor.value,
                int(k),
                f"{s:.9g}",
                f"{c:.9g}",
            ])
        return buf.getvalue()

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_csv().encode("utf-8"))

    @classmethod
    def read_csv(cls, path: str | Path, seed: int = 0, **overrides) -> "Dataset":
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no data rows")
        head = rows[0]
        config = ScenarioConfig(
            head["lte_variant"],
            head["wifi_variant"],
            int(head["bandwidth_mhz"]),
            head["predictor"],
            seed=seed,
            **overrides,
        )
        if int(head["scenario_id"]) != config.scenario_id:
            raise ValueError(f"{path}: scenario_id does not match its configuration")
        return cls(
            config,
            np.array([float(r["sinr_db"]) for r in rows]),
            np.array([float(r["capacity_mbps"]) for r in rows]),
            np.array([int(r["sample_index"]) for r in rows]),
        )


# ----------------------------------------------------------------------------
# Geometry and propagation
# ----------------------------------------------------------------------------


def _rng(config: ScenarioConfig, stream: int, *extra: int) -> np.random.Generator:
    ss = np.random.SeedSequence(config.seed, spawn_key=(stream, *config.network_key, *extra))
    return np.random.default_rng(ss)


def place_nodes(
    config: ScenarioConfig,
    n_candidates: int = 2000,
    tournament: int = 64,
    max_restarts: int = 500,
) -> np.ndarray:
    """Random dense topology with every pairwise distance in the configured window.

    Nodes are added one at a time. Candidates are dropped at a window-sized
    radius from random placed nodes; of the feasible ones, a random tournament
    keeps the candidate giving the most compact layout, which is what lets six
    nodes fit into a 5-10 m window. A dead end restarts the layout.
    """
    lo, hi = config.inter_node_min_m, config.inter_node_max_m
    rng = _rng(config, _GEOMETRY_STREAM)
    n = config.node_count
    eps = 1e-9
    for _ in range(max_restarts):
        pos = np.zeros((1, 2))
        for k in range(1, n):
            r = rng.uniform(lo, hi, n_candidates)
            theta = rng.uniform(0.0, 2.0 * math.pi, n_candidates)
            anchor = pos[rng.integers(k, size=n_candidates)]
            cand = anchor + np.column_stack([r * np.cos(theta), r * np.sin(theta)])
            delta = cand[:, None, :] - pos[None, :, :]
            d = np.hypot(delta[..., 0], delta[..., 1])
            ok = np.flatnonzero(np.all((d >= lo - eps) & (d <= hi + eps), axis=1))
            if ok.size == 0:
                break
            if ok.size > tournament:
                ok = rng.choice(ok, tournament, replace=False)
            cc = cand[ok]
            centre = (pos.sum(axis=0) + cc) / (k + 1)
            dp = pos[None, :, :] - centre[:, None, :]
            spread = np.maximum(np.hypot(dp[..., 0], dp[..., 1]).max(axis=1),
                                np.hypot(*(cc - centre).T))
            pos = np.vstack([pos, cc[np.argmin(spread)]])
        if len(pos) == n:
            return pos
    raise PlacementInfeasible(
        f"could not place {n} nodes with pairwise distances in [{lo}, {hi}] m"
    )


def place_receivers(
    tx_positions: np.ndarray,
    rng: np.random.Generator,
    radio: RadioParams = RadioParams(),
) -> np.ndarray:
    """UE positions at log-uniform distances from their serving transmitters."""
    n = len(tx_positions)
    d = np.exp(rng.uniform(math.log(radio.ue_min_m), math.log(radio.ue_max_m), n))
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    return tx_positions + d[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])


def reference_receivers(tx_positions: np.ndarray, radio: RadioParams = RadioParams()) -> np.ndarray:
    """Deterministic UE layout at the geometric-mean UE distance, pointing away from the centroid."""
    d = math.sqrt(radio.ue_min_m * radio.ue_max_m)
    out = tx_positions - tx_positions.mean(axis=0)
    norm = np.hypot(*out.T)
    unit = np.where(norm[:, None] > 1e-9, out / np.maximum(norm, 1e-12)[:, None], [1.0, 0.0])
    return tx_positions + d * unit


def path_loss_db(distance_m, carrier_ghz: float = 5.0, exponent: float = 3.5):
    """Log-distance path loss with a free-space 1 m reference."""
    d = np.maximum(np.asarray(distance_m, dtype=float), 0.1)
    ref = 20.0 * math.log10(4.0 * math.pi * carrier_ghz * 1e9 / SPEED_OF_LIGHT)
    return ref + 10.0 * exponent * np.log10(d)


def noise_floor_dbm(bandwidth_mhz: float, radio: RadioParams = RadioParams()) -> float:
    return THERMAL_NOISE_DBM_HZ + 10.0 * math.log10(bandwidth_mhz * 1e6) + radio.noise_figure_db


def link_gain_db(
    tx_positions: np.ndarray,
    rx_positions: np.ndarray,
    carrier_ghz: float = 5.0,
    radio: RadioParams = RadioParams(),
    shadowing_db: np.ndarray | None = None,
) -> np.ndarray:
    """Channel gain matrix ``G[r, t]`` in dB from transmitter t to receiver r."""
    diff = rx_positions[:, None, :] - tx_positions[None, :, :]
    g = -path_loss_db(np.hypot(diff[..., 0], diff[..., 1]), carrier_ghz, radio.path_loss_exponent)
    if shadowing_db is not None:
        g = g + shadowing_db
    return g


def sinr_db(signal_dbm, interference_dbm, overlap, noise_dbm: float) -> float:
    """SINR of one link from its own signal and overlap-weighted interferers."""
    interf = np.asarray(interference_dbm, dtype=float)
    w = np.asarray(overlap, dtype=float)
    total_mw = np.sum(w * 10.0 ** (interf / 10.0)) + 10.0 ** (noise_dbm / 10.0)
    return float(signal_dbm - 10.0 * math.log10(total_mw))


def compute_sinr(
    tx_positions: np.ndarray,
    rx_positions: np.ndarray,
    tx_power_dbm,
    overlap: np.ndarray,
    bandwidth_mhz: float,
    carrier_ghz: float = 5.0,
    radio: RadioParams = RadioParams(),
    shadowing_db: np.ndarray | None = None,
    interference_offset_db=None,
) -> np.ndarray:
    """SINR(dB) of every link ``t -> rx[t]``.

    ``overlap[i, j]`` is the fraction of link i's airtime during which
    transmitter j is also active. ``interference_offset_db[j]`` attenuates
    transmitter j towards receivers it does not serve.
    """
    n = len(tx_positions)
    p = np.broadcast_to(np.asarray(tx_power_dbm, dtype=float), (n,))
    rx_dbm = link_gain_db(tx_positions, rx_positions, carrier_ghz, radio, shadowing_db) + p[None, :]
    if interference_offset_db is not None:
        off = np.broadcast_to(np.asarray(interference_offset_db, dtype=float), (n,))
        rx_dbm = rx_dbm - off[None, :] * (1.0 - np.eye(n))
    w = np.array(overlap, dtype=float)
    np.fill_diagonal(w, 0.0)
    interf_mw = np.sum(w * 10.0 ** (rx_dbm / 10.0), axis=1)
    noise_mw = 10.0 ** (noise_floor_dbm(bandwidth_mhz, radio) / 10.0)
    return np.diag(rx_dbm) - 10.0 * np.log10(interf_mw + noise_mw)


def shannon_capacity(sinr_db, bandwidth_mhz, airtime, se_cap: float | None = None):
    """Airtime-scaled Shannon capacity in Mbps."""
    se = np.log2(1.0 + 10.0 ** (np.asarray(sinr_db, dtype=float) / 10.0))
    if se_cap is not None:
        se = np.minimum(se, se_cap)
    out = np.asarray(airtime, dtype=float) * bandwidth_mhz * se
    return float(out) if np.ndim(out) == 0 else out


def quadratic_capacity(sinr_db, bandwidth_mhz, airtime):
    """Generator ground-truth CIR: airtime * B * quadratic(SINR dB), floored at 0."""
    s = np.asarray(sinr_db, dtype=float)
    c0, c1, c2 = QUADRATIC_TRUTH
    se = np.maximum(c0 + c1 * s + c2 * s * s, 0.0)
    out = np.asarray(airtime, dtype=float) * bandwidth_mhz * se
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------------------------
# Channel access
# ----------------------------------------------------------------------------


def deferral_matrix(roles: list[str], sensed_dbm: np.ndarray, mac: MacParams = MacParams()) -> np.ndarray:
    """``defer[l, t]``: listener l holds off while transmitter t is active."""
    n = len(roles)
    defer = np.zeros((n, n), dtype=bool)
    for l, t in product(range(n), range(n)):
        if l == t:
            continue
        p = sensed_dbm[l, t]
        if roles[l] == LteVariant.LAA.value:
            defer[l, t] = p >= mac.laa_ed_dbm
        elif roles[l] == "WIFI":
            thr = mac.wifi_preamble_dbm if roles[t] == "WIFI" else mac.wifi_ed_dbm
            defer[l, t] = p >= thr
    return defer


def airtime_from_sensing(
    roles: list[str],
    sensed_dbm: np.ndarray,
    mac: MacParams = MacParams(),
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-node airtime and the symmetric contention graph.

    LTE-U airtime is its (jittered) ON fraction, or 1 when no Wi-Fi shares the
    band. A sensing node keeps the time left by the LTE-U nodes it defers to
    and splits it with every node it contends with.
    """
    n = len(roles)
    defer = deferral_matrix(roles, sensed_dbm, mac)
    contend = defer | defer.T
    air = np.ones(n)
    has_wifi = "WIFI" in roles
    lteu = [i for i, r in enumerate(roles) if r == LteVariant.LTE_U.value]
    for i in lteu:
        if not has_wifi:
            continue
        jitter = 0.0
        if rng is not None and mac.lteu_duty_jitter > 0:
            jitter = rng.uniform(-mac.lteu_duty_jitter, mac.lteu_duty_jitter)
        air[i] = min(1.0, max(0.05, mac.lteu_duty_on_fraction + jitter))
    for i in range(n):
        if roles[i] == LteVariant.LTE_U.value:
            continue
        residual = 1.0
        for u in lteu:
            if defer[i, u]:
                residual *= 1.0 - air[u]
        peers = sum(1 for j in range(n) if j != i and contend[i, j] and roles[j] != LteVariant.LTE_U.value)
        share = residual / (1 + peers)
        if roles[i] == LteVariant.LAA.value and np.any(contend[i]):
            share *= mac.lbt_efficiency
        air[i] = share
    return air, contend


def overlap_matrix(airtime: np.ndarray, contend: np.ndarray, mac: MacParams = MacParams()) -> np.ndarray:
    """``w[i, j]``: fraction of link i's airtime overlapped by transmitter j."""
    w = np.where(contend, mac.collision_overlap, airtime[None, :])
    np.fill_diagonal(w, 0.0)
    return w


def _sensing_matrix(config, positions, radio, shadow):
    g = link_gain_db(positions, positions, config.carrier_ghz, radio)
    np.fill_diagonal(g, 0.0)
    return g + shadow + config.tx_power_dbm


def _symmetric_shadow(rng, n, sigma):
    a = rng.normal(0.0, sigma, (n, n))
    s = np.triu(a, 1)
    return s + s.T


def _shadow_sigma(config: ScenarioConfig, radio: RadioParams) -> float:
    f = radio.lteu_dispersion if config.lte_variant is LteVariant.LTE_U else 1.0
    return radio.shadowing_db * f


def interference_offsets(config: ScenarioConfig, radio: RadioParams = RadioParams()) -> np.ndarray:
    """Per-transmitter attenuation towards foreign receivers (802.11ac beamforming proxy)."""
    off = np.zeros(config.node_count)
    if config.wifi_variant is WifiVariant.IEEE80211AC:
        off[config.n_lte:] = radio.ac_interference_offset_db
    return off


def wifi_se_cap(config: ScenarioConfig, radio: RadioParams = RadioParams()) -> float:
    if config.wifi_variant is WifiVariant.IEEE80211AC:
        return radio.wifi_se_cap_ac
    return radio.wifi_se_cap_n


@dataclass(frozen=True, eq=False)
class EpochState:
    """Snapshot of the whole network in one measurement epoch."""

    rx_positions: np.ndarray
    airtime: np.ndarray
    contend: np.ndarray
    overlap: np.ndarray
    sinr_db: np.ndarray
    capacity_mbps: np.ndarray


def epoch_rng(config: ScenarioConfig, epoch: int) -> np.random.Generator:
    return _rng(config, _EPOCH_STREAM, epoch)


def simulate_epoch(
    config: ScenarioConfig,
    positions: np.ndarray,
    mac: MacParams = MacParams(),
    radio: RadioParams = RadioParams(),
    rng: np.random.Generator | None = None,
) -> EpochState:
    """One epoch: redraw shadowing, UE placement and duty jitter, then evaluate all links."""
    n = config.node_count
    sigma = _shadow_sigma(config, radio)
    if rng is None:
        rx = reference_receivers(positions, radio)
        sense_shadow = np.zeros((n, n))
        link_shadow = None
    else:
        rx = place_receivers(positions, rng, radio)
        sense_shadow = _symmetric_shadow(rng, n, sigma)
        link_shadow = rng.normal(0.0, sigma, (n, n))
    roles = config.roles()
    sensed = _sensing_matrix(config, positions, radio, sense_shadow)
    air, contend = airtime_from_sensing(roles, sensed, mac, rng)
    w = overlap_matrix(air, contend, mac)
    s = compute_sinr(
        positions, rx, config.tx_power_dbm, w, config.bandwidth_mhz,
        config.carrier_ghz, radio, link_shadow, interference_offsets(config, radio),
    )
    cap = np.array(shannon_capacity(s, config.bandwidth_mhz, air))
    wifi = np.array([r == "WIFI" for r in roles])
    cap[wifi] = shannon_capacity(s[wifi], config.bandwidth_mhz, air[wifi], wifi_se_cap(config, radio))
    return EpochState(rx, air, contend, w, s, cap)


def channel_airtime(
    config: ScenarioConfig,
    mac: MacParams = MacParams(),
    epoch_seed: int | None = None,
    radio: RadioParams = RadioParams(),
) -> np.ndarray:
    """Per-node airtime fractions of the scenario in one epoch (None = mean channel)."""
    positions = place_nodes(config)
    rng = None if epoch_seed is None else epoch_rng(config, epoch_seed)
    return simulate_epoch(config, positions, mac, radio, rng).airtime


def simulate_scenario(
    config: ScenarioConfig,
    n_samples: int = 200,
    mac: MacParams = MacParams(),
    radio: RadioParams = RadioParams(),
    truth: str = "quadratic",
    noise: bool = True,
    contamination: float = 0.0,
) -> Dataset:
    """Measurement campaign of one scenario.

    Sample k observes LTE link ``k % n_lte`` in epoch k, redrawing the epoch
    while that link is below the decode floor. ``truth`` selects the
    emitted capacity law: ``"quadratic"`` (recoverable ground-truth CIR) or
    ``"shannon"``. ``contamination`` replaces that fraction of samples with
    gross capacity errors and flags them in ``Dataset.injected``.
    """
    if n_samples < 10:
        raise ValueError("n_samples must be >= 10")
    if truth not in ("quadratic", "shannon"):
        raise ValueError("truth must be 'quadratic' or 'shannon'")
    positions = place_nodes(config)
    bw = config.bandwidth_mhz
    disp = radio.lteu_dispersion if config.lte_variant is LteVariant.LTE_U else 1.0
    sinr = np.empty(n_samples)
    air = np.empty(n_samples)
    cap = np.empty(n_samples)
    for k in range(n_samples):
        link = k % config.n_lte
        rng = epoch_rng(config, k)
        state = simulate_epoch(config, positions, mac, radio, rng)
        for attempt in range(1, radio.max_redraws + 1):
            if state.sinr_db[link] >= radio.decode_floor_db:
                break
            rng = _rng(config, _EPOCH_STREAM, k, attempt)
            state = simulate_epoch(config, positions, mac, radio, rng)
        s, a = state.sinr_db[link], state.airtime[link]
        c = shannon_capacity(s, bw, a) if truth == "shannon" else quadratic_capacity(s, bw, a)
        if noise:
            c += rng.normal(0.0, radio.capacity_noise_se * disp * a * bw)
        sinr[k], air[k], cap[k] = s, a, max(c, 0.0)
    injected = np.zeros(n_samples, dtype=bool)
    if contamination > 0:
        crng = _rng(config, _CONTAMINATION_STREAM)
        m = int(round(contamination * n_samples))
        idx = crng.choice(n_samples, size=m, replace=False)
        scale = cap.std()
        for i in idx:
            shift = crng.uniform(3.0, 5.0) * scale
            # Push downwards only when there is room above zero.
            sign = -1.0 if cap[i] - shift > 0 and crng.random() < 0.5 else 1.0
            cap[i] = cap[i] + sign * shift
        injected[idx] = True
    return Dataset(config, sinr, cap, np.arange(n_samples), air, injected)


def config_to_json(config: ScenarioConfig, mac: MacParams | None = None) -> str:
    doc = {"scenario": config.to_dict()}
    if mac is not None:
        doc["mac"] = mac.to_dict()
    return json.dumps(doc, indent=2, sort_keys=True)
