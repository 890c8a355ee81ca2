"""Superframe construction with reserved retransmission slots."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from ..errors import SchedulingError

SENSING = "sensing"
ACTUATION = "actuation"


@dataclass
class Flow:
    """A periodic end-to-end stream over a fixed source route.

    ``eta_target`` is the #TX the network manager currently wants; ``per_node_eta``
    is what each node on the route actually applies, and ``pending`` holds
    values received by piggyback that take effect at the next frame boundary.
    """

    flow_id: str
    kind: str
    route: list
    eta_target: int = 1
    per_node_eta: dict = field(default_factory=dict)
    pending: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in (SENSING, ACTUATION):
            raise SchedulingError(f"flow {self.flow_id}: unknown kind {self.kind!r}")
        if len(self.route) < 2:
            raise SchedulingError(f"flow {self.flow_id}: route needs at least two nodes")
        if len(set(self.route)) != len(self.route):
            raise SchedulingError(f"flow {self.flow_id}: route {self.route} is cyclic")
        if self.kind == SENSING:
            self.eta_target = 1
        if not self.per_node_eta:
            self.per_node_eta = {node: self.eta_target for node in self.route}

    @property
    def hops(self):
        return list(zip(self.route[:-1], self.route[1:]))


@dataclass(frozen=True)
class ScheduleEntry:
    slot_offset: int
    channel: int
    sender: str
    receiver: str
    flow_id: str
    tx_index: int


@dataclass
class Superframe:
    entries: list
    length_slots: int
    slot_ms: int = 10

    def __post_init__(self):
        self.entries.sort(key=lambda e: (e.slot_offset, e.channel))
        self._by_flow = defaultdict(list)
        for e in self.entries:
            self._by_flow[e.flow_id].append(e)

    def flow_entries(self, flow_id):
        return self._by_flow[flow_id]

    def hop_blocks(self, flow_id):
        """Per hop, the entries of that hop ordered by attempt index."""
        blocks = defaultdict(list)
        for e in self._by_flow[flow_id]:
            blocks[(e.sender, e.receiver)].append(e)
        return [sorted(b, key=lambda e: e.tx_index) for b in blocks.values()]

    def first_attempt_slots(self, flow_id):
        return [b[0].slot_offset for b in self.hop_blocks(flow_id)]

    def active_slots(self, flow_id, eta):
        """Slots a flow occupies when every node applies ``eta`` transmissions."""
        return sorted(e.slot_offset for e in self._by_flow[flow_id] if e.tx_index <= eta)

    def validate(self):
        cells = set()
        busy = set()
        for e in self.entries:
            if (e.slot_offset, e.channel) in cells:
                raise SchedulingError(f"cell collision at slot {e.slot_offset}, channel {e.channel}")
            cells.add((e.slot_offset, e.channel))
            for node in (e.sender, e.receiver):
                if (e.slot_offset, node) in busy:
                    raise SchedulingError(f"node {node} double-booked at slot {e.slot_offset}")
                busy.add((e.slot_offset, node))
            if not 0 <= e.slot_offset < self.length_slots:
                raise SchedulingError(f"entry {e} lies outside the {self.length_slots}-slot frame")


def build_superframe(flows, eta_max, length_slots=None, windows=None, n_channels=16):
    """Greedy earliest-fit TDMA schedule.

    Every hop of an actuation flow gets ``eta_max`` consecutive slots, the
    first being its first-attempt slot; sensing hops get a single slot.
    Hops follow route order.  ``windows`` maps a flow kind to the
    ``[start, end)`` slot range it must fit in.
    """
    windows = windows or {}
    if length_slots is None:
        length_slots = sum(
            len(f.hops) * (eta_max if f.kind == ACTUATION else 1) for f in flows
        )
    node_busy = defaultdict(set)
    cell_used = defaultdict(set)
    entries = []
    for flow in flows:
        block = eta_max if flow.kind == ACTUATION else 1
        start, end = windows.get(flow.kind, (0, length_slots))
        earliest = start
        for sender, receiver in flow.hops:
            s = earliest
            while True:
                if s + block > end:
                    raise SchedulingError(
                        f"flow {flow.flow_id} does not fit: hop {sender}->{receiver} "
                        f"needs slots up to {s + block} but the window ends at {end}"
                    )
                slots = range(s, s + block)
                if any(sender in node_busy[k] or receiver in node_busy[k] for k in slots):
                    s += 1
                    continue
                free = [c for c in range(n_channels) if all(c not in cell_used[k] for k in slots)]
                if not free:
                    s += 1
                    continue
                ch = free[0]
                break
            for i, k in enumerate(slots):
                node_busy[k].update((sender, receiver))
                cell_used[k].add(ch)
                entries.append(ScheduleEntry(k, ch, sender, receiver, flow.flow_id, i + 1))
            earliest = s + block
    frame = Superframe(entries, length_slots)
    frame.validate()
    return frame
