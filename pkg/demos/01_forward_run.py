"""Drop the desk-scale robot, let it settle, then drive it with the initial gait.

    python demos/01_forward_run.py [out_dir]

The initial design is half-dense everywhere and the pulse weights are almost
zero, so the robot mostly sags under gravity and twitches.
"""
import sys
from pathlib import Path

import numpy as np

from softrigid import io
from softrigid.gradients import Multipliers, evaluate_design
from softrigid.scene import load_scene
from softrigid.stepper import Simulator

ROOT = Path(__file__).resolve().parents[1]
out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out/demo_forward")

cfg = load_scene(ROOT / "scenes" / "desk.yaml")
sim = Simulator(cfg)
print(f"{sim.n_particles} particles, {sim.net.n_nodes} nodes, {sim.net.n_bars} bars "
      f"({sim.gs.n_designable} designable), {sim.n_steps} steps of {cfg.dt:g} s")

ev = evaluate_design(sim, sim.initial_design(), Multipliers.initial(), record=True, checkpoint=False)
t, probes, cg, V = ev.run.trajectory.as_arrays()

# settling: how far did the center of mass drop before actuation started?
k0 = int(np.argmin(np.abs(t - cfg.phases.t_start_s)))
print(f"settled: cg z {1e3 * cg[0, 2]:.2f} -> {1e3 * cg[k0, 2]:.2f} mm")
print(f"forward travel during actuation: {1e3 * ev.report.L_x:.3f} mm")
print(f"shape deviation: soft {1e3 * ev.report.D_soft:.2f} mm, skeleton {1e3 * ev.report.D_bone:.2f} mm")

files = io.export_trajectory(ev.run.trajectory, sim, out)
print("wrote", ", ".join(str(p) for p in files.values()))
