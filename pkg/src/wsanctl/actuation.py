"""Actuator-side buffer that replays the latest delivered input plan."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError


@dataclass
class ActuationBuffer:
    seq: np.ndarray
    t_issued: int = 0

    @classmethod
    def filled(cls, u_bar, N, t_issued=0):
        """Buffer holding ``u_bar`` for all ``N`` slots (the pre-delivery state)."""
        u_bar = np.atleast_1d(np.asarray(u_bar, dtype=float))
        return cls(np.tile(u_bar, (max(N, 1), 1)), t_issued)

    @property
    def capacity(self):
        return self.seq.shape[0]

    def push(self, seq, t_issued):
        seq = np.asarray(seq, dtype=float)
        if seq.ndim == 1:
            seq = seq.reshape(-1, 1)
        if seq.shape != self.seq.shape:
            raise ConfigurationError(f"plan of shape {seq.shape} does not fit buffer {self.seq.shape}")
        self.seq = seq.copy()
        self.t_issued = int(t_issued)
        return self

    def pop(self, t_now):
        """Input for control period ``t_now``; holds the last element past the plan end."""
        offset = int(t_now) - self.t_issued
        if offset < 0:
            raise ConfigurationError(f"pop({t_now}) precedes plan issue time {self.t_issued}")
        return self.seq[min(offset, self.capacity - 1)].copy()
