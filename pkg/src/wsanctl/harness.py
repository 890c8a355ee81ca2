"""Scenario runner: wires plant, network, filter, MPC, buffer and #TX policy.

One control period ``k`` (start time ``T_k``) runs as follows:

1. every actuator pops its input ``u_k`` from its buffer;
2. the sensors sample ``y_k`` and the sensing window of the frame runs;
3. the filter predicts with the input it believes was applied in period
   ``k-1`` and corrects with ``y_k`` when it arrived, giving ``x̂_{k|k}``;
4. the controller plans from the one-step prediction
   ``A x̂_{k|k} + B u_k^cmd`` because its plan can only act from ``T_{k+1}``;
5. the #TX policy sees that plan's value ``V`` and the windowed PDR;
6. the actuation window carries the plan (and the current #TX target);
   a delivered plan is pushed into the buffer with issue time ``k+1``;
7. the plant integrates ``u_k`` over the period and the frame boundary
   applies any #TX values heard by piggyback.

So the input applied from ``T_{k+1}`` is based on the measurement taken at
``T_k``, never one taken during period ``k+1``.
"""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .actuation import ActuationBuffer
from .adaptation import AdaptConfig, AdaptState, hc_step, pn_step
from .config import ScenarioConfig
from .errors import ConfigurationError, WsanctlError
from .estimator import EstimatorState, advance, correct
from .metrics import EnergyModel, LoopRecord, MetricsLog, mae, read_csv, write_summary
from .mpc import LyapunovConstants, MpcConfig, Polytope, lyapunov_constants, solve_mpc
from .plant import (
    DisturbanceProfile,
    PlantModel,
    PlantState,
    Setpoint,
    check_setpoint,
    equilibrium_for_input,
    measure,
    nearest_equilibrium,
    step,
)
from .wsan.link import LinkModel, NoiseSchedule, draw_rssi
from .wsan.network import Network, PdrWindow
from .wsan.schedule import ACTUATION, SENSING, Flow

log = logging.getLogger(__name__)


def build_setpoint(model, lc):
    if lc.snap == "nearest_equilibrium":
        sp = nearest_equilibrium(model, lc.x_bar)
    elif lc.snap == "from_u":
        sp = Setpoint(equilibrium_for_input(model, lc.u_bar), lc.u_bar)
    else:
        sp = Setpoint(lc.x_bar, lc.u_bar)
    check_setpoint(model, sp)
    return sp


def build_controller(model, sp, lc):
    """MPC configuration and certificate constants for one loop."""
    U = None
    if lc.u_max is not None:
        U = Polytope.box(-lc.u_max - sp.u_bar, lc.u_max - sp.u_bar)
    mpc = MpcConfig(model.A, model.B, lc.Q, lc.R, lc.N, lc.beta, U=U)
    if lc.alphas is None:
        consts = lyapunov_constants(model.A, model.B, lc.Q, lc.R, lc.N, lc.beta, P=mpc.P)
    else:
        consts = LyapunovConstants(lc.alphas["alpha1"], lc.alphas["alpha2"], lc.alphas["alpha3"], mpc.P, mpc.K)
    return mpc, consts


@dataclass
class Loop:
    """Run-time state of one control loop."""

    cfg: object
    model: PlantModel
    fast: PlantModel
    sp: Setpoint
    mpc: MpcConfig
    consts: LyapunovConstants
    adapt_cfg: AdaptConfig
    plant: PlantState
    est: EstimatorState
    buffer: ActuationBuffer
    adapt: AdaptState
    pdr: PdrWindow
    disturbance: DisturbanceProfile
    plan: np.ndarray
    plan_issued: int = 0
    pn_hold_until: int = -1
    u_prev_applied: np.ndarray | None = None

    @property
    def loop_id(self):
        return self.cfg.loop_id

    def commanded(self, k):
        """Input the controller believes the actuator applies in period ``k``."""
        off = min(max(k - self.plan_issued, 0), self.plan.shape[0] - 1)
        return self.plan[off]


@dataclass
class World:
    cfg: ScenarioConfig
    loops: list
    net: Network
    rng: np.random.Generator
    log: MetricsLog
    energy: EnergyModel
    nodes: list
    k: int = 0
    extra: dict = field(default_factory=dict)


def build_network(cfg):
    flows = [
        Flow(str(f["id"]), f["kind"], [str(n) for n in f["route"]]) for f in cfg.flows
    ]
    hops = sorted({hop for f in flows for hop in f.hops})
    rssi = draw_rssi(hops, cfg.rssi_range, cfg.topology_seed)
    rssi.update(cfg.rssi)
    link = LinkModel(rssi, NoiseSchedule(cfg.noise_breakpoints, cfg.jitter_db), cfg.s0, cfg.sigma)
    tm = cfg.timing
    windows = {SENSING: (0, tm.sense_slots), ACTUATION: (tm.sense_slots, tm.sense_slots + tm.act_slots)}
    return Network(
        flows, link, cfg.eta_max,
        frame_slots=tm.sense_slots + tm.act_slots,
        windows=windows,
        slots_per_period=tm.slots_per_period,
        phase_offsets={SENSING: 0, ACTUATION: tm.act_offset_slots},
        slot_sec=tm.slot_ms / 1000.0,
    )


def build_world(cfg, seed):
    """Fresh simulation state for one run of ``cfg`` with RNG seed ``seed``."""
    tm = cfg.timing
    net = build_network(cfg)
    loops = []
    for lc in cfg.loops:
        model = PlantModel(lc.A, lc.B, lc.C, dt_plant=tm.period_sec)
        fast = model.substep_model(tm.substeps)
        sp = build_setpoint(model, lc)
        mpc, consts = build_controller(model, sp, lc)
        acfg = AdaptConfig(consts, lc.lam, lc.tau1, lc.tau2, lc.gamma, lc.rho_min, cfg.eta_max, lc.eta_floor)
        eta0 = cfg.fixed_eta if cfg.algo == "fixed" else lc.eta0
        net.force_eta(lc.actuation_flow, eta0)
        est = EstimatorState.initial(lc.xhat0, model.n, model.p, lc.sigma0, lc.est_w, lc.est_v)
        buf = ActuationBuffer.filled(sp.u_bar, max(lc.N, 1))
        plan = np.tile(sp.u_bar, (max(lc.N, 1), 1))
        loops.append(Loop(
            lc, model, fast, sp, mpc, consts, acfg,
            PlantState(lc.x0), est, buf, AdaptState.initial(eta0), PdrWindow(cfg.pdr_window),
            DisturbanceProfile(lc.bias, lc.bias_interval), plan,
        ))
    nodes = cfg.nodes or sorted({n for f in net.flows.values() for n in f.route})
    mlog = MetricsLog(period_sec=tm.period_sec)
    return World(cfg, loops, net, np.random.default_rng(seed), mlog, EnergyModel(**cfg.energy), nodes)


def _adapt(world, lp, V, rho, k):
    cfg = world.cfg
    fid = lp.cfg.actuation_flow
    if cfg.algo == "hc":
        lp.adapt, cmd = hc_step(lp.adapt, lp.adapt_cfg, V, rho, k)
        if cmd is not None:
            world.net.set_eta(fid, cmd)
    elif cfg.algo == "pn":
        if k > lp.pn_hold_until:
            eta = world.net.flows[fid].eta_target
            new = pn_step(eta, rho, cfg.eta_max, lp.cfg.eta_floor, cfg.pn_low, cfg.pn_high)
            if new != eta:
                world.net.set_eta(fid, new)
                lp.pn_hold_until = k + lp.cfg.tau1


def run_period_pipeline(world, k=None):
    """Advance ``world`` by one control period (see the module docstring)."""
    k = world.k if k is None else k
    cfg = world.cfg
    tm = cfg.timing
    t = k * tm.period_sec
    net = world.net

    u_now = [lp.buffer.pop(k) for lp in world.loops]
    y_now = [measure(lp.model, lp.plant, lp.disturbance, t) for lp in world.loops]
    sense = net.run_phase(SENSING, k, t, world.rng)
    world.log.add_radio(sense)

    plans = []
    for i, lp in enumerate(world.loops):
        y = y_now[i] if sense.delivered[lp.cfg.sensing_flow] else None
        if k == 0:
            lp.est = correct(lp.est, lp.model, y)
        else:
            u_prev = lp.u_prev_applied if lp.cfg.est_input == "applied" else lp.commanded(k - 1)
            lp.est = advance(lp.est, lp.model, u_prev, y)
        u_cmd = u_now[i] if lp.cfg.est_input == "applied" else lp.commanded(k)
        x_plan = lp.model.A @ lp.est.x_hat + lp.model.B @ u_cmd
        sol = solve_mpc(x_plan - lp.sp.x_bar, lp.mpc)
        rho = lp.pdr.value()
        _adapt(world, lp, sol.V, rho, k)
        plans.append((sol, rho))

    act = net.run_phase(ACTUATION, k, t, world.rng)
    world.log.add_radio(act)

    noise = net.link.noise.level(t)
    for i, lp in enumerate(world.loops):
        sol, rho = plans[i]
        fid = lp.cfg.actuation_flow
        plan = sol.u_seq + lp.sp.u_bar
        delivered = act.delivered[fid]
        if delivered:
            lp.buffer.push(plan, k + 1)
        lp.plan, lp.plan_issued = plan, k + 1
        lp.pdr.record(delivered)
        V_true = math.nan
        if cfg.audit_true_V:
            V_true = solve_mpc(lp.plant.x - lp.sp.x_bar, lp.mpc).V
        world.log.append(LoopRecord(
            t_sec=t,
            loop_id=lp.loop_id,
            x=lp.plant.x.copy(),
            xhat=lp.est.x_hat.copy(),
            u=float(u_now[i][0]),
            V=sol.V,
            rho=rho,
            eta_scheduled=net.flows[fid].eta_target,
            delivered_sense=sense.delivered[lp.cfg.sensing_flow],
            delivered_act=delivered,
            actual_tx=sum(act.attempts[fid]),
            noise_dbm=noise,
            hop_attempts=tuple(act.attempts[fid]),
            feasible=sol.feasible,
            V_true=V_true,
        ))

    for i, lp in enumerate(world.loops):
        st = lp.plant
        for _ in range(tm.substeps):
            st = step(lp.fast, st, u_now[i])
            if st.diverged:
                break
        lp.plant = PlantState(st.x, k + 1, st.diverged)
        lp.u_prev_applied = u_now[i]
        if st.diverged and not world.log.unstable:
            world.log.unstable = True
            world.log.unstable_loop = lp.loop_id

    net.frame_boundary()
    world.k = k + 1
    world.log.n_periods = world.k
    return world


def run_scenario(cfg, seed=None):
    """Simulate one run; stops early once any plant diverges."""
    seed = cfg.seed if seed is None else seed
    n = cfg.n_periods
    if n <= 0:
        raise WsanctlError("scenario duration yields an empty trajectory")
    world = build_world(cfg, seed)
    for k in range(n):
        run_period_pipeline(world, k)
        if world.log.unstable:
            log.info("run seed=%d diverged at t=%.1f s (loop %s)", seed, k * cfg.timing.period_sec,
                     world.log.unstable_loop)
            break
    return world


def run_summary(world):
    cfg = world.cfg
    x_bars = {lp.loop_id: lp.sp.x_bar for lp in world.loops}
    out = world.log.summary(x_bars, world.energy, world.nodes, cfg.powered, cfg.eta_max)
    out["algo"] = cfg.algo_label
    for lp in world.loops:
        out["loops"][lp.loop_id].update(
            alpha1=lp.consts.alpha1, alpha2=lp.consts.alpha2, alpha3=lp.consts.alpha3,
            x_bar=lp.sp.x_bar.tolist(),
        )
    return out


def _one_run(args):
    cfg, seed, out_dir, plots = args
    tag = f"{cfg.algo_label}_seed{seed}"
    try:
        world = run_scenario(cfg, seed)
    except WsanctlError as exc:
        return {"algo": cfg.algo_label, "seed": seed, "error": f"{type(exc).__name__}: {exc}"}
    summ = run_summary(world)
    summ["seed"] = seed
    if out_dir:
        world.log.write_csv(os.path.join(out_dir, f"{tag}.csv"))
        write_summary(summ, os.path.join(out_dir, f"{tag}.json"))
        if plots:
            from .plots import plot_run
            plot_run(world, os.path.join(out_dir, f"{tag}.png"))
    return summ


def aggregate(runs):
    """Fold per-run summaries into per-algorithm statistics (order independent)."""
    by_algo = {}
    for r in sorted(runs, key=lambda r: (r["algo"], r["seed"])):
        by_algo.setdefault(r["algo"], []).append(r)
    out = {}
    for algo, rs in sorted(by_algo.items()):
        errors = [r for r in rs if "error" in r]
        done = [r for r in rs if "error" not in r]
        stable = [r for r in done if not r["unstable"]]
        entry = {
            "runs": len(rs),
            "errors": len(errors),
            "unstable": sum(r["unstable"] for r in done),
            "unstable_seeds": sorted(r["seed"] for r in done if r["unstable"]),
            "loops": {},
        }
        lids = sorted({lid for r in stable for lid in r["loops"]})
        for lid in lids:
            ls = [r["loops"][lid] for r in stable]
            entry["loops"][lid] = {
                key: float(np.mean([v[key] for v in ls]))
                for key in ("mae", "mean_eta", "mean_actual_tx_per_hop", "mean_actual_tx_per_packet", "pdr_act")
            }
        entry["lifetime_days"] = float(np.mean([r["lifetime_days"] for r in stable])) if stable else None
        out[algo] = entry
    return out


def run_batch(cfg, out_dir=None, runs=None, seed=None, algos=None, jobs=1, plots=False):
    """Paired-seed batch: run ``r`` of every algorithm uses seed ``seed + r``."""
    runs = cfg.runs if runs is None else runs
    seed = cfg.seed if seed is None else seed
    if runs < 1:
        raise ConfigurationError("runs must be >= 1")
    if cfg.n_periods <= 0:
        raise WsanctlError("scenario duration yields an empty trajectory")
    cfgs = [cfg] if not algos else [cfg.with_algo(a) for a in algos]
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    tasks = [(c, seed + r, out_dir, plots) for c in cfgs for r in range(runs)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            results = list(ex.map(_one_run, tasks))
    else:
        results = [_one_run(t) for t in tasks]
    summary = {"scenario": cfg.name, "seed": seed, "runs": runs, "algos": aggregate(results)}
    if out_dir:
        write_summary(summary, os.path.join(out_dir, "summary.json"))
    return summary, results


def rebuild_report(out_dir):
    """Recompute per-run and batch summaries from the run CSVs in ``out_dir``.

    Control and network figures come from the CSV records; the setpoint,
    stability flag and lifetime (which needs per-node radio counts) come from
    each CSV's JSON sidecar.
    """
    runs = []
    for name in sorted(os.listdir(out_dir)):
        if not name.endswith(".csv"):
            continue
        side = os.path.join(out_dir, name[:-4] + ".json")
        if not os.path.exists(side):
            raise WsanctlError(f"{name}: missing sidecar {os.path.basename(side)}")
        with open(side) as fh:
            summ = json.load(fh)
        if "error" in summ:
            runs.append(summ)
            continue
        cols = read_csv(os.path.join(out_dir, name))
        for lid, c in cols.items():
            entry = summ["loops"][lid]
            n = len(entry["x_bar"])
            traj = np.column_stack([c[f"x{i}"] for i in range(n)])
            entry["mae"] = None if summ["unstable"] else mae(traj, entry["x_bar"])
            entry["mean_eta"] = float(np.mean(c["eta_scheduled"]))
            entry["pdr_act"] = float(np.mean(c["delivered_act"]))
            entry["pdr_sense"] = float(np.mean(c["delivered_sense"]))
        runs.append(summ)
    if not runs:
        raise WsanctlError(f"{out_dir}: no run CSVs found")
    summary = {"runs": len(runs), "algos": aggregate(runs)}
    write_summary(summary, os.path.join(out_dir, "summary.json"))
    return summary
