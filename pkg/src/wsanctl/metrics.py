"""Control-performance and network-cost accounting."""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, WsanctlError

SECONDS_PER_DAY = 86400.0


@dataclass(frozen=True)
class EnergyModel:
    """Per-slot radio energies (J), idle power (W) and battery capacity (J)."""

    e_tx: float = 2.0e-4
    e_rx: float = 1.9e-4
    e_idle: float = 5.0e-5
    capacity_j: float = 8640.0

    def __post_init__(self):
        for name in ("e_tx", "e_rx", "e_idle", "capacity_j"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"energy model: {name} must be nonnegative")


def mae(traj, x_bar):
    """Mean absolute deviation from ``x_bar`` over all states and samples."""
    traj = np.asarray(traj, dtype=float)
    if traj.size == 0:
        raise WsanctlError("MAE of an empty trajectory")
    traj = traj.reshape(traj.shape[0], -1)
    return float(np.mean(np.abs(traj - np.asarray(x_bar, dtype=float).ravel())))


def battery_life(tx_counts, rx_counts, duration_sec, em, nodes, powered=()):
    """Per-node and system lifetime in days.

    Average power is ``E_tx * tx_rate + E_rx * rx_rate + E_idle``.  Nodes in
    ``powered`` are mains-powered and left out.  Returns ``(per_node, system)``.
    """
    if duration_sec <= 0:
        raise WsanctlError("battery life needs a positive observation time")
    per_node = {}
    for node in nodes:
        if node in powered:
            continue
        power = (em.e_tx * tx_counts.get(node, 0) + em.e_rx * rx_counts.get(node, 0)) / duration_sec
        power += em.e_idle
        per_node[node] = math.inf if power == 0 else em.capacity_j / power / SECONDS_PER_DAY
    system = min(per_node.values()) if per_node else math.inf
    return per_node, system


def actual_tx_stats(hop_attempts, eta_max):
    """Distribution of attempts per hop per actuation packet.

    ``hop_attempts`` is an iterable of per-packet lists (attempts on each hop).
    Returns ``(histogram over 0..eta_max, mean attempts per hop, mean per packet)``.
    """
    hist = np.zeros(eta_max + 1, dtype=np.int64)
    per_packet = []
    for packet in hop_attempts:
        for a in packet:
            hist[min(int(a), eta_max)] += 1
        per_packet.append(sum(packet))
    n_hops = hist.sum()
    mean_hop = float(np.dot(np.arange(eta_max + 1), hist) / n_hops) if n_hops else 0.0
    mean_packet = float(np.mean(per_packet)) if per_packet else 0.0
    return hist, mean_hop, mean_packet


def csv_header(n):
    return (
        ["t_sec", "loop_id"]
        + [f"x{i}" for i in range(n)]
        + [f"xhat{i}" for i in range(n)]
        + ["u", "V", "rho", "eta_scheduled", "delivered_sense", "delivered_act", "actual_tx", "noise_dbm"]
    )


def _fmt(v):
    # repr round-trips floats exactly, which keeps CSVs byte-stable
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class LoopRecord:
    t_sec: float
    loop_id: str
    x: np.ndarray
    xhat: np.ndarray
    u: float
    V: float
    rho: float
    eta_scheduled: int
    delivered_sense: bool
    delivered_act: bool
    actual_tx: int
    noise_dbm: float
    hop_attempts: tuple = ()
    feasible: bool = True
    V_true: float = math.nan

    def row(self, n):
        pad = [""] * (n - len(self.x))
        return (
            [_fmt(self.t_sec), str(self.loop_id)]
            + [_fmt(v) for v in self.x] + pad
            + [_fmt(v) for v in self.xhat] + pad
            + [_fmt(self.u), _fmt(self.V), _fmt(self.rho), _fmt(self.eta_scheduled),
               _fmt(self.delivered_sense), _fmt(self.delivered_act), _fmt(self.actual_tx),
               _fmt(self.noise_dbm)]
        )


@dataclass
class MetricsLog:
    """Append-only per-period records plus per-node radio activity."""

    records: list = field(default_factory=list)
    tx: Counter = field(default_factory=Counter)
    rx: Counter = field(default_factory=Counter)
    n_periods: int = 0
    period_sec: float = 0.2
    unstable: bool = False
    unstable_loop: str = ""

    def append(self, rec):
        self.records.append(rec)

    def add_radio(self, report):
        self.tx.update(report.tx)
        self.rx.update(report.rx)

    def loop_ids(self):
        seen = []
        for r in self.records:
            if r.loop_id not in seen:
                seen.append(r.loop_id)
        return seen

    def loop(self, loop_id):
        return [r for r in self.records if r.loop_id == loop_id]

    def column(self, loop_id, name):
        return np.array([getattr(r, name) for r in self.loop(loop_id)])

    @property
    def duration_sec(self):
        return self.n_periods * self.period_sec

    def write_csv(self, path):
        n = max((len(r.x) for r in self.records), default=0)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(csv_header(n))
            for r in self.records:
                w.writerow(r.row(n))

    def summary(self, x_bars, em, nodes, powered, eta_max):
        """Run-level aggregates; ``x_bars`` maps loop id to its setpoint."""
        out = {"unstable": self.unstable, "n_periods": self.n_periods, "loops": {}}
        if self.unstable:
            out["unstable_loop"] = self.unstable_loop
        for lid in self.loop_ids():
            recs = self.loop(lid)
            hist, mean_hop, mean_packet = actual_tx_stats([r.hop_attempts for r in recs], eta_max)
            out["loops"][str(lid)] = {
                "mae": None if self.unstable else mae([r.x for r in recs], x_bars[lid]),
                "mean_eta": float(np.mean([r.eta_scheduled for r in recs])),
                "mean_actual_tx_per_hop": mean_hop,
                "mean_actual_tx_per_packet": mean_packet,
                "actual_tx_hist": hist.tolist(),
                "pdr_act": float(np.mean([r.delivered_act for r in recs])),
                "pdr_sense": float(np.mean([r.delivered_sense for r in recs])),
            }
        per_node, system = battery_life(self.tx, self.rx, max(self.duration_sec, 1e-12), em, nodes, powered)
        out["lifetime_days"] = system
        out["lifetime_per_node"] = per_node
        return out


def write_summary(summary, path):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


def read_csv(path):
    """Load a run CSV back into a dict of column arrays keyed by loop id."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise WsanctlError(f"{path}: no records")
    loops = {}
    for r in rows:
        loops.setdefault(r["loop_id"], []).append(r)
    out = {}
    for lid, rs in loops.items():
        cols = {}
        for key in rs[0]:
            if key == "loop_id":
                continue
            vals = [r[key] for r in rs]
            if all(v != "" for v in vals):
                cols[key] = np.array([float(v) for v in vals])
        out[lid] = cols
    return out
