"""Static figures for a finished run: states, V, #TX, PDR and noise."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def plot_run(world, path):
    """One column of five panels per control loop."""
    loops = world.loops
    fig, axes = plt.subplots(5, len(loops), figsize=(6 * len(loops), 12), sharex=True, squeeze=False)
    mlog = world.log
    for j, lp in enumerate(loops):
        lid = lp.loop_id
        t = mlog.column(lid, "t_sec")
        x = np.array([r.x for r in mlog.loop(lid)])
        ax = axes[0, j]
        for i in range(x.shape[1]):
            ax.plot(t, x[:, i], lw=0.8, label=f"x{i}")
            ax.axhline(lp.sp.x_bar[i], color="0.6", lw=0.5, ls=":")
        ax.set_ylabel("state")
        ax.set_title(f"loop {lid} ({world.cfg.algo_label})")
        ax.legend(fontsize=7, ncol=5)

        ax = axes[1, j]
        ax.semilogy(t, np.maximum(mlog.column(lid, "V"), 1e-12), lw=0.8, label="V")
        a1g = lp.adapt_cfg.safety_level
        ax.axhline(a1g, color="r", ls="--", lw=0.8, label="safety level")
        ax.axhline(lp.adapt_cfg.relax_level, color="g", ls="--", lw=0.8, label="dead-band floor")
        ax.set_ylabel("V")
        ax.legend(fontsize=7)

        ax = axes[2, j]
        ax.step(t, mlog.column(lid, "eta_scheduled"), where="post", lw=0.9)
        ax.set_ylabel("#TX")
        ax.set_ylim(0.5, world.cfg.eta_max + 0.5)

        ax = axes[3, j]
        ax.plot(t, mlog.column(lid, "rho"), lw=0.8)
        ax.set_ylabel("PDR")
        ax.set_ylim(-0.05, 1.05)

        ax = axes[4, j]
        ax.plot(t, mlog.column(lid, "noise_dbm"), lw=0.8)
        ax.set_ylabel("noise [dBm]")
        ax.set_xlabel("t [s]")
    fig.tight_layout()
    fig.savefig(path, dpi=90)
    plt.close(fig)
    return path
