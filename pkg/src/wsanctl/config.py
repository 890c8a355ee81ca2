"""Scenario files: YAML text with a ``.cfg`` extension.

A file may name another with ``base:`` (path relative to itself); the two are
deep-merged, keys in the derived file winning.  Lists are replaced, not merged.
Numbers may be written as fractions in strings (``"1/12"``).
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import yaml

from .errors import ConfigurationError

ALGOS = ("hc", "pn", "fixed")


def _num(v, where):
    if isinstance(v, bool):
        raise ConfigurationError(f"{where}: expected a number, got {v!r}")
    if isinstance(v, (int, float)):
        return float(v)
    if isinstance(v, str):
        try:
            return float(Fraction(v.strip()))
        except (ValueError, ZeroDivisionError):
            pass
    raise ConfigurationError(f"{where}: expected a number, got {v!r}")


def _array(v, where, ndim=None):
    if isinstance(v, (int, float, str)):
        out = np.array(_num(v, where))
    else:
        try:
            out = np.array(_nested(v, where), dtype=float)
        except ValueError as exc:
            raise ConfigurationError(f"{where}: ragged matrix") from exc
    if ndim == 2:
        out = np.atleast_2d(out)
    return out


def _nested(v, where):
    if isinstance(v, list):
        return [_nested(x, where) for x in v]
    return _num(v, where)


def _square(v, n, where):
    """Matrix from ``identity``, a scalar (times I), a diagonal list or full rows."""
    if isinstance(v, str) and v.strip() == "identity":
        return np.eye(n)
    M = _array(v, where)
    if M.ndim == 0:
        return float(M) * np.eye(n)
    if M.ndim == 1:
        if M.size != n:
            raise ConfigurationError(f"{where}: diagonal has {M.size} entries, expected {n}")
        return np.diag(M)
    if M.shape != (n, n):
        raise ConfigurationError(f"{where}: shape {M.shape}, expected {(n, n)}")
    return M


def deep_merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def read_raw(path, _seen=None):
    path = os.path.abspath(path)
    _seen = _seen or set()
    if path in _seen:
        raise ConfigurationError(f"{path}: circular base reference")
    _seen.add(path)
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from exc
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"{path}: invalid YAML: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: top level must be a mapping")
    base = raw.pop("base", None)
    if base is not None:
        base_path = os.path.join(os.path.dirname(path), base)
        raw = deep_merge(read_raw(base_path, _seen), raw)
    return raw


@dataclass(frozen=True)
class Timing:
    control_period_ms: int = 200
    plant_dt_ms: int = 10
    slot_ms: int = 10
    t_sense_ms: int = 60
    t_kf_ms: int = 10
    t_ctrl_ms: int = 30
    t_act_ms: int = 80

    def __post_init__(self):
        total = self.t_sense_ms + self.t_kf_ms + self.t_ctrl_ms + self.t_act_ms
        if total > self.control_period_ms:
            raise ConfigurationError(
                f"timing: sensing+filter+control+actuation = {total} ms exceeds the "
                f"{self.control_period_ms} ms control period"
            )
        for name in ("control_period_ms", "t_sense_ms", "t_kf_ms", "t_ctrl_ms", "t_act_ms"):
            if getattr(self, name) % self.slot_ms:
                raise ConfigurationError(f"timing: {name} is not a multiple of slot_ms={self.slot_ms}")
        if self.control_period_ms % self.plant_dt_ms:
            raise ConfigurationError("timing: control period is not a multiple of plant_dt_ms")

    @property
    def period_sec(self):
        return self.control_period_ms / 1000.0

    @property
    def substeps(self):
        return self.control_period_ms // self.plant_dt_ms

    @property
    def slots_per_period(self):
        return self.control_period_ms // self.slot_ms

    @property
    def sense_slots(self):
        return self.t_sense_ms // self.slot_ms

    @property
    def act_slots(self):
        return self.t_act_ms // self.slot_ms

    @property
    def act_offset_slots(self):
        """Slot inside the control period where the actuation window starts."""
        return (self.t_sense_ms + self.t_kf_ms + self.t_ctrl_ms) // self.slot_ms


@dataclass
class LoopConfig:
    loop_id: str
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    x_bar: np.ndarray
    u_bar: np.ndarray
    snap: str
    x0: np.ndarray
    xhat0: np.ndarray
    Q: np.ndarray
    R: np.ndarray
    N: int
    beta: float
    u_max: float | None
    alphas: dict | None
    lam: float
    tau1: int
    tau2: int
    gamma: float
    rho_min: float
    eta_floor: int
    eta0: int
    sensing_flow: str
    actuation_flow: str
    est_w: float
    est_v: float
    sigma0: float
    est_input: str
    bias: float
    bias_interval: tuple | None


@dataclass
class ScenarioConfig:
    name: str
    duration_sec: float
    seed: int
    runs: int
    algo: str
    fixed_eta: int
    timing: Timing
    loops: list
    nodes: list
    powered: list
    flows: list
    rssi: dict
    rssi_range: tuple
    topology_seed: int
    noise_breakpoints: list
    jitter_db: float
    s0: float
    sigma: float
    pdr_window: int
    eta_max: int
    pn_low: float
    pn_high: float
    energy: dict
    audit_true_V: bool = False
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def n_periods(self):
        return int(round(self.duration_sec / self.timing.period_sec))

    @property
    def algo_label(self):
        return f"fixed{self.fixed_eta}" if self.algo == "fixed" else self.algo

    def with_algo(self, name):
        algo, k = parse_algo(name, self.eta_max)
        out = copy.copy(self)
        out.algo, out.fixed_eta = algo, k
        return out


def parse_algo(name, eta_max=4):
    """``hc``, ``pn`` or ``fixed:<k>`` (also ``fixed<k>``)."""
    s = str(name).strip().lower()
    if s in ("hc", "pn"):
        return s, 0
    if s.startswith("fixed"):
        tail = s[5:].lstrip(":")
        try:
            k = int(tail)
        except ValueError:
            raise ConfigurationError(f"algorithm {name!r}: expected fixed:<k>") from None
        if not 1 <= k <= eta_max:
            raise ConfigurationError(f"algorithm {name!r}: k must lie in 1..{eta_max}")
        return "fixed", k
    raise ConfigurationError(f"unknown algorithm {name!r}; expected hc, pn or fixed:<k>")


def _parse_loop(d, i, eta_max):
    where = f"loops[{i}]"
    if "plant" not in d:
        raise ConfigurationError(f"{where}: missing plant block")
    plant = d["plant"]
    A = _array(plant.get("A"), f"{where}.plant.A", ndim=2)
    n = A.shape[0]
    B = _array(plant.get("B"), f"{where}.plant.B").reshape(n, -1)
    C = _array(plant.get("C"), f"{where}.plant.C", ndim=2)
    sp = d.get("setpoint", {}) or {}
    x_bar = _array(sp.get("x_bar", [0.0] * n), f"{where}.setpoint.x_bar").reshape(-1)
    u_bar = np.atleast_1d(_array(sp.get("u_bar", 0.0), f"{where}.setpoint.u_bar")).reshape(-1)
    snap = sp.get("snap", "none")
    if snap not in ("none", "nearest_equilibrium", "from_u"):
        raise ConfigurationError(f"{where}.setpoint.snap: unknown mode {snap!r}")
    x0 = _array(d.get("x0", [0.0] * n), f"{where}.x0").reshape(-1)
    xhat0 = d.get("xhat0", None)
    xhat0 = x0.copy() if xhat0 is None else _array(xhat0, f"{where}.xhat0").reshape(-1)
    if x0.size != n or xhat0.size != n or x_bar.size != n:
        raise ConfigurationError(f"{where}: x0, xhat0 and x_bar must have {n} entries")
    mpc = d.get("mpc", {}) or {}
    m = B.shape[1]
    Q = _square(mpc.get("Q", "identity"), n, f"{where}.mpc.Q")
    R = _square(mpc.get("R", 1.0), m, f"{where}.mpc.R")
    N = int(mpc.get("N", 10))
    beta = _num(mpc.get("beta", 1.0), f"{where}.mpc.beta")
    u_max = mpc.get("u_max", None)
    u_max = None if u_max is None else _num(u_max, f"{where}.mpc.u_max")
    alphas = mpc.get("alphas", None)
    if alphas is not None:
        alphas = {k: _num(alphas[k], f"{where}.mpc.alphas.{k}") for k in ("alpha1", "alpha2", "alpha3")}
    ad = d.get("adapt", {}) or {}
    est = d.get("estimator", {}) or {}
    est_input = est.get("input", "commanded")
    if est_input not in ("commanded", "applied"):
        raise ConfigurationError(f"{where}.estimator.input must be commanded or applied")
    dist = d.get("disturbance", {}) or {}
    interval = dist.get("interval", None)
    if interval is not None:
        interval = tuple(_num(v, f"{where}.disturbance.interval") for v in interval)
        if len(interval) != 2:
            raise ConfigurationError(f"{where}.disturbance.interval needs [start, end]")
    flows = d.get("flows", {}) or {}
    if "sensing" not in flows or "actuation" not in flows:
        raise ConfigurationError(f"{where}.flows needs sensing and actuation flow ids")
    eta0 = int(ad.get("eta0", 1))
    if not 1 <= eta0 <= eta_max:
        raise ConfigurationError(f"{where}.adapt.eta0 must lie in 1..{eta_max}")
    return LoopConfig(
        loop_id=str(d.get("id", i + 1)),
        A=A, B=B, C=C, x_bar=x_bar, u_bar=u_bar, snap=snap, x0=x0, xhat0=xhat0,
        Q=Q, R=R, N=N, beta=beta, u_max=u_max, alphas=alphas,
        lam=_num(ad.get("lam", 0.1), f"{where}.adapt.lam"),
        tau1=int(ad.get("tau1", 5)),
        tau2=int(ad.get("tau2", 25)),
        gamma=_num(ad.get("gamma", 16.0), f"{where}.adapt.gamma"),
        rho_min=_num(ad.get("rho_min", 0.7), f"{where}.adapt.rho_min"),
        eta_floor=int(ad.get("eta_floor", 1)),
        eta0=eta0,
        sensing_flow=str(flows["sensing"]),
        actuation_flow=str(flows["actuation"]),
        est_w=_num(est.get("W", 1e-4), f"{where}.estimator.W"),
        est_v=_num(est.get("V", 1e-4), f"{where}.estimator.V"),
        sigma0=_num(est.get("sigma0", 1.0), f"{where}.estimator.sigma0"),
        est_input=est_input,
        bias=_num(dist.get("bias", 0.0), f"{where}.disturbance.bias"),
        bias_interval=interval,
    )


def _parse_rssi(v):
    out = {}
    for key, dbm in (v or {}).items():
        parts = [p.strip() for p in str(key).split("->")]
        if len(parts) != 2:
            raise ConfigurationError(f"network.rssi key {key!r}: expected 'sender->receiver'")
        out[tuple(parts)] = _num(dbm, f"network.rssi[{key}]")
    return out


def from_dict(raw, name="scenario"):
    raw = copy.deepcopy(raw)
    net = raw.get("network", {}) or {}
    eta_max = int(net.get("eta_max", 4))
    loops_raw = raw.get("loops")
    if not loops_raw:
        raise ConfigurationError("config defines no control loops")
    loops = [_parse_loop(d, i, eta_max) for i, d in enumerate(loops_raw)]
    ids = [lp.loop_id for lp in loops]
    if len(set(ids)) != len(ids):
        raise ConfigurationError(f"duplicate loop ids {ids}")
    flows = net.get("flows") or []
    flow_ids = set()
    for f in flows:
        for key in ("id", "kind", "route"):
            if key not in f:
                raise ConfigurationError(f"network.flows entry {f} lacks {key!r}")
        flow_ids.add(str(f["id"]))
    nodes = [str(n) for n in net.get("nodes", [])]
    for f in flows:
        missing = [n for n in f["route"] if str(n) not in nodes]
        if nodes and missing:
            raise ConfigurationError(f"flow {f['id']}: unknown nodes {missing}")
    for lp in loops:
        for fid in (lp.sensing_flow, lp.actuation_flow):
            if fid not in flow_ids:
                raise ConfigurationError(f"loop {lp.loop_id}: flow {fid!r} not defined in network.flows")
    noise = net.get("noise", {}) or {}
    bps = noise.get("breakpoints", [[0.0, -78.0]])
    bps = [(_num(t, "noise.breakpoints"), _num(v, "noise.breakpoints")) for t, v in bps]
    link = net.get("link", {}) or {}
    timing = Timing(**{k: int(v) for k, v in (raw.get("timing", {}) or {}).items()})
    algo, k = parse_algo(raw.get("algo", "hc"), eta_max)
    duration = _num(raw.get("duration_sec", 200.0), "duration_sec")
    if duration < 0:
        raise ConfigurationError("duration_sec must be nonnegative")
    rr = net.get("rssi_range", [-62.5, -61.5])
    pn = raw.get("pn", {}) or {}
    from .wsan.link import DEFAULT_JITTER, DEFAULT_S0, DEFAULT_SIGMA

    cfg = ScenarioConfig(
        name=str(raw.get("name", name)),
        duration_sec=duration,
        seed=int(raw.get("seed", 1)),
        runs=int(raw.get("runs", 1)),
        algo=algo,
        fixed_eta=k,
        timing=timing,
        loops=loops,
        nodes=nodes,
        powered=[str(n) for n in net.get("powered", [])],
        flows=flows,
        rssi=_parse_rssi(net.get("rssi")),
        rssi_range=(_num(rr[0], "rssi_range"), _num(rr[1], "rssi_range")),
        topology_seed=int(net.get("topology_seed", 0)),
        noise_breakpoints=bps,
        jitter_db=_num(noise.get("jitter_db", DEFAULT_JITTER), "noise.jitter_db"),
        s0=_num(link.get("s0", DEFAULT_S0), "link.s0"),
        sigma=_num(link.get("sigma", DEFAULT_SIGMA), "link.sigma"),
        pdr_window=int(net.get("pdr_window", 50)),
        eta_max=eta_max,
        pn_low=_num(pn.get("low", 0.8), "pn.low"),
        pn_high=_num(pn.get("high", 0.9), "pn.high"),
        energy=dict(raw.get("energy", {}) or {}),
        audit_true_V=bool(raw.get("audit_true_V", False)),
        raw=raw,
    )
    if cfg.runs < 1:
        raise ConfigurationError("runs must be >= 1")
    if cfg.pdr_window < 1:
        raise ConfigurationError("network.pdr_window must be >= 1")
    return cfg


def load_config(path):
    raw = read_raw(path)
    return from_dict(raw, name=os.path.splitext(os.path.basename(path))[0])


def preset_path(name):
    """Path of a shipped preset, e.g. ``preset_path("interference")``."""
    here = os.path.join(os.path.dirname(__file__), "presets")
    fname = name if name.endswith(".cfg") else name + ".cfg"
    path = os.path.join(here, fname)
    if not os.path.exists(path):
        raise ConfigurationError(f"no preset named {name!r}")
    return path
