"""Slot-by-slot execution of the superframe over the stochastic links."""

from __future__ import annotations

import logging
from collections import Counter, deque
from dataclasses import dataclass, field

from .link import link_trial
from .schedule import ACTUATION, SENSING, build_superframe

log = logging.getLogger(__name__)

N_CHANNELS = 16


@dataclass
class DeliveryReport:
    delivered: dict = field(default_factory=dict)
    attempts: dict = field(default_factory=dict)
    tx: Counter = field(default_factory=Counter)
    rx: Counter = field(default_factory=Counter)
    piggyback: dict = field(default_factory=dict)

    def merge(self, other):
        self.delivered.update(other.delivered)
        self.attempts.update(other.attempts)
        self.tx.update(other.tx)
        self.rx.update(other.rx)
        self.piggyback.update(other.piggyback)
        return self

    @property
    def total_attempts(self):
        return sum(sum(a) for a in self.attempts.values())


def apply_piggyback(flow, node, eta_new):
    """Record a #TX command heard by ``node``; it takes effect at the next frame."""
    flow.pending[node] = int(eta_new)


class PdrWindow:
    """End-to-end delivery ratio over the last ``size`` control periods."""

    def __init__(self, size=50):
        self._hist = deque(maxlen=size)

    def record(self, delivered):
        self._hist.append(bool(delivered))

    def __len__(self):
        return len(self._hist)

    def value(self):
        # empty window reads as perfect delivery
        if not self._hist:
            return 1.0
        return sum(self._hist) / len(self._hist)


class Network:
    """Flows, their superframe and link model, plus the absolute slot counter.

    One superframe runs per control period.  The sensing and actuation parts
    of the frame are executed separately by :meth:`run_phase` so the
    controller can compute in between.
    """

    def __init__(self, flows, link, eta_max=4, frame_slots=None, windows=None,
                 slots_per_period=20, phase_offsets=None, slot_sec=0.01):
        self.flows = {f.flow_id: f for f in flows}
        self.link = link
        self.eta_max = eta_max
        self.windows = windows or {}
        self.frame = build_superframe(flows, eta_max, frame_slots, self.windows, N_CHANNELS)
        self.slots_per_period = slots_per_period
        # slot position of each frame window inside the control period
        self.phase_offsets = phase_offsets or {SENSING: 0, ACTUATION: 0}
        self.slot_sec = slot_sec
        for f in flows:
            for a, b in f.hops:
                link.link_rssi(a, b)

    def _window_slots(self, kind):
        start, end = self.windows.get(kind, (0, self.frame.length_slots))
        return start, end

    def run_phase(self, kind, period, t_period_sec, rng):
        """Run every slot of the ``kind`` window for control period ``period``."""
        start, end = self._window_slots(kind)
        flows = [f for f in self.flows.values() if f.kind == kind]
        holder = {f.flow_id: 0 for f in flows}
        hop_of = {f.flow_id: {hop: i for i, hop in enumerate(f.hops)} for f in flows}
        report = DeliveryReport()
        for f in flows:
            report.attempts[f.flow_id] = [0] * len(f.hops)
            report.piggyback[f.flow_id] = set()
            if f.kind == ACTUATION:
                # manager is co-located with the source
                apply_piggyback(f, f.route[0], f.eta_target)
                report.piggyback[f.flow_id].add(f.route[0])
        shift = self.phase_offsets.get(kind, 0) - start
        for e in self.frame.entries:
            if not start <= e.slot_offset < end:
                continue
            f = self.flows.get(e.flow_id)
            if f is None or f.kind != kind:
                continue
            h = hop_of[f.flow_id][(e.sender, e.receiver)]
            if holder[f.flow_id] != h:
                continue
            if e.tx_index > f.per_node_eta[e.sender]:
                continue
            report.attempts[f.flow_id][h] += 1
            report.tx[e.sender] += 1
            if e.tx_index > f.per_node_eta[e.receiver]:
                # receiver is not listening in this retransmission slot
                continue
            report.rx[e.receiver] += 1
            slot_in_period = e.slot_offset + shift
            asn = period * self.slots_per_period + slot_in_period
            channel = (e.channel + asn) % N_CHANNELS
            t_sec = t_period_sec + slot_in_period * self.slot_sec
            if link_trial(self.link, (e.sender, e.receiver), channel, t_sec, rng):
                holder[f.flow_id] = h + 1
                if f.kind == ACTUATION:
                    apply_piggyback(f, e.receiver, f.eta_target)
                    report.piggyback[f.flow_id].add(e.receiver)
        for f in flows:
            report.delivered[f.flow_id] = holder[f.flow_id] == len(f.hops)
        return report

    def run_period(self, period, t_period_sec, rng):
        report = self.run_phase(SENSING, period, t_period_sec, rng)
        report.merge(self.run_phase(ACTUATION, period, t_period_sec, rng))
        self.frame_boundary()
        return report

    def frame_boundary(self):
        for f in self.flows.values():
            for node, eta in f.pending.items():
                f.per_node_eta[node] = min(max(eta, 1), self.eta_max)
            f.pending.clear()

    def set_eta(self, flow_id, eta):
        f = self.flows[flow_id]
        if f.kind != ACTUATION:
            raise ValueError(f"flow {flow_id} is a sensing flow; its #TX is fixed at 1")
        f.eta_target = int(eta)

    def force_eta(self, flow_id, eta):
        """Set target and every node's applied #TX at once (fixed-#TX runs, tests)."""
        f = self.flows[flow_id]
        f.eta_target = int(eta)
        for node in f.route:
            f.per_node_eta[node] = int(eta)
