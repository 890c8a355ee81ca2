"""TDMA multi-hop wireless sensor-actuator network simulator."""

from .link import LinkModel, NoiseSchedule, link_trial
from .network import DeliveryReport, Network, PdrWindow, apply_piggyback
from .schedule import ACTUATION, SENSING, Flow, ScheduleEntry, Superframe, build_superframe

__all__ = [
    "ACTUATION",
    "SENSING",
    "DeliveryReport",
    "Flow",
    "LinkModel",
    "Network",
    "NoiseSchedule",
    "PdrWindow",
    "ScheduleEntry",
    "Superframe",
    "apply_piggyback",
    "build_superframe",
    "link_trial",
]
