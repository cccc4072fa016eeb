"""Co-design the desk-scale robot and check what the skeleton contributes.

    python demos/03_codesign.py [iterations] [out_dir]

Fifty iterations take roughly 20 minutes on a desktop CPU. Afterwards the
optimized design is re-simulated with every bone removed (gamma = 0) under the
same gait.
"""
import logging
import sys
from pathlib import Path

import numpy as np

from softrigid import io
from softrigid.gradients import Multipliers, evaluate_design
from softrigid.optimizer import optimize
from softrigid.scene import load_scene
from softrigid.stepper import Simulator

logging.basicConfig(level=logging.INFO, format="%(message)s")
ROOT = Path(__file__).resolve().parents[1]
iters = int(sys.argv[1]) if len(sys.argv) > 1 else 50
out = Path(sys.argv[2]) if len(sys.argv) > 2 else Path("out/demo_codesign")
out.mkdir(parents=True, exist_ok=True)

sim = Simulator(load_scene(ROOT / "scenes" / "desk.yaml"))
design, state, hist = optimize(sim, iters, log_path=out / "optimization_log.csv",
                               snapshot_path=out / "optimizer_snapshot.npz")
io.export_design(sim, out)

Lx = 1e3 * hist.column("L_x")
print(f"L_x: first {Lx[0]:.3f} mm, best of first 5 {Lx[:5].max():.3f} mm, last {Lx[-1]:.3f} mm")
print(f"bones kept (gamma > 0.5): {int(np.sum(design.gamma > 0.5))} of {design.gamma.size}")

mult = Multipliers.initial()
with_skel = evaluate_design(sim, design, mult, checkpoint=False).report.L_x
bare = design.copy()
bare.gamma[:] = 0.0
without = evaluate_design(sim, bare, mult, checkpoint=False).report.L_x
print(f"with skeleton {1e3 * with_skel:.3f} mm, without {1e3 * without:.3f} mm "
      f"(ratio {without / with_skel:.2f})")
