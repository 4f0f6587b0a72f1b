"""Closed-loop alignment: drive a simulated camera until the object sits at
the image center, oriented along the image x axis.

Shows both rotational laws: the plain one (single equilibrium at 0) and the
symmetric-object variant (equilibria at 0 and 180 degrees). Plots the angle
trajectories to demos/output/servo.png.
"""
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from loopkit.servo import Gains, ServoState, simulate

OUT = Path(__file__).parent / "output"


def run(theta0_deg, symmetric):
    state = ServoState(
        camera_position=np.zeros(2),
        camera_heading=0.0,
        target_position=np.array([40.0, 25.0]),
        target_theta=math.radians(theta0_deg),
    )
    return simulate(state, Gains(k_pt=1.0, k_ptheta=1.0, dt=0.05),
                    symmetric=symmetric, max_steps=10_000)


def main():
    OUT.mkdir(exist_ok=True)
    fig, axes = plt.subplots(1, 2, figsize=(11, 4), sharey=True)
    starts = [20, 85, 95, 170, 190, 265, 275, 340]
    for ax, symmetric in zip(axes, (False, True)):
        for deg in starts:
            res = run(deg, symmetric)
            angles = [math.degrees(p.relative_theta) for p in res.trajectory]
            # unwrap for readability
            for i in range(1, len(angles)):
                while angles[i] - angles[i - 1] > 180:
                    angles[i] -= 360
                while angles[i] - angles[i - 1] < -180:
                    angles[i] += 360
            ax.plot(angles, label=f"{deg} deg ({res.steps} steps)")
            print(f"{'sym' if symmetric else 'std':3s} theta0={deg:3d}: "
                  f"converged={res.converged} steps={res.steps} "
                  f"final={math.degrees(res.final_state.relative_theta):7.2f} deg")
        ax.axhline(0, color="k", lw=0.5)
        if symmetric:
            ax.axhline(180, color="k", lw=0.5)
            ax.axhline(-180, color="k", lw=0.5)
        ax.set_title("symmetric law" if symmetric else "standard law")
        ax.set_xlabel("step")
        ax.legend(fontsize=7)
    axes[0].set_ylabel("relative angle (deg)")
    fig.tight_layout()
    fig.savefig(OUT / "servo.png", dpi=120)
    print(f"plot written to {OUT / 'servo.png'}")


if __name__ == "__main__":
    main()
