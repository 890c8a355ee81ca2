"""Per-loop transmission-count (#TX) adaptation policies.

``hc_step`` is the holistic manager: it raises the #TX when the Lyapunov value
of the current estimate leaves the safety level or stops decaying as fast as
the ideal-network worst case allows, and lowers it slowly while the value is
well inside the safety level and the measured PDR is acceptable.  ``pn_step``
is the PDR-threshold baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import ConfigurationError
from .mpc import LyapunovConstants

NONE, DECREASING, INCREASING = -1, 0, 1


@dataclass(frozen=True)
class AdaptConfig:
    consts: LyapunovConstants
    lam: float = 0.1
    tau1: int = 5
    tau2: int = 25
    gamma: float = 16.0
    rho_min: float = 0.7
    eta_max: int = 4
    eta_floor: int = 1

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ConfigurationError("lambda must lie in (0, 1)")
        if self.tau1 < 1 or self.tau2 < 1:
            raise ConfigurationError("tau1 and tau2 must be >= 1")
        if self.gamma <= 0:
            raise ConfigurationError("gamma must be positive")
        if not 0 <= self.rho_min <= 1:
            raise ConfigurationError("rho_min must lie in [0, 1]")
        if not 1 <= self.eta_floor <= self.eta_max:
            raise ConfigurationError("need 1 <= eta_floor <= eta_max")

    @property
    def safety_level(self):
        return self.consts.alpha1 * self.gamma

    @property
    def relax_level(self):
        return self.lam * self.consts.alpha1 * self.gamma


@dataclass(frozen=True)
class AdaptState:
    eta: int
    delta: int = NONE
    t0: int = 0
    hold_until: int = -1
    V_ref: float = 0.0

    @classmethod
    def initial(cls, eta, t=0):
        return cls(eta=eta, t0=t)


def hc_step(st, cfg, V, rho, t):
    """Advance the holistic manager by one control period.

    Returns ``(state, command)`` where ``command`` is the new #TX, or None when
    the #TX did not change.  Nothing is evaluated while a previous change is
    still propagating (``t <= hold_until``).
    """
    if t <= st.hold_until:
        return st, None

    if V < cfg.relax_level and st.eta > cfg.eta_floor and rho >= cfg.rho_min:
        if st.delta != DECREASING:
            st = replace(st, t0=t, delta=DECREASING)
        if t - st.t0 > cfg.tau2:
            eta = st.eta - 1
            return replace(st, eta=eta, t0=t, hold_until=t + cfg.tau1), eta
        return st, None

    if V > cfg.safety_level and st.eta < cfg.eta_max:
        entering = st.delta != INCREASING
        if entering:
            st = replace(st, t0=t, V_ref=V)
        if entering or V > decay_bound(st, cfg, t):
            eta = st.eta + 1
            return replace(st, eta=eta, delta=INCREASING, hold_until=t + cfg.tau1), eta
        return st, None

    return st, None


def decay_bound(st, cfg, t):
    return cfg.consts.decay_rate ** (t - st.t0) * st.V_ref


def pn_step(eta, rho, eta_max=4, eta_floor=1, low=0.8, high=0.9):
    if rho < low:
        return min(eta + 1, eta_max)
    if rho > high:
        return max(eta - 1, eta_floor)
    return eta
