"""Fourier view of a gait: dominant frequency and rear-to-front phase delay.

    python demos/04_gait_spectrum.py [optimizer_snapshot.npz]

Without a snapshot a synthetic two-phase gait is built from the pulse basis:
the front actuator repeats the rear pattern about a quarter tone period later.
"""
import sys
from pathlib import Path

import numpy as np

from softrigid.actuation import synthesize_voltage
from softrigid.optimizer import load_snapshot
from softrigid.scene import load_scene
from softrigid.spectrum import analyze_spectrum

ROOT = Path(__file__).resolve().parents[1]
cfg = load_scene(ROOT / "scenes" / "desk.yaml")
sig, ph = cfg.actuators.signal, cfg.phases

if len(sys.argv) > 1:
    w = load_snapshot(sys.argv[1])[0].w
else:
    k = np.arange(cfg.n_pulses)
    rear = 0.5 * (1 + np.cos(2 * np.pi * 4 * k / cfg.n_pulses))
    w = np.stack([rear, np.roll(rear, cfg.n_pulses // 16)])

dt = 1e-3
t = ph.t_start_s + np.arange(int(round(ph.cycle_duration_s / dt))) * dt
V = synthesize_voltage(w, t, sig.pulse_dt_s, sig.pulse_sigma_s, sig.pulse_amp, ph.cycle_duration_s,
                       ph.t_start_s, ph.t_end_s, sig.ceiling, sig.sharpness)
rep = analyze_spectrum(V, dt, ph.cycle_duration_s)
print("dominant frequency per actuator:", ", ".join(f"{f:.2f} Hz" for f in rep.frequencies_hz))
print(f"shared bin {rep.dominant_hz:.2f} Hz, phase delay rear -> front {rep.phase_delay_rad:.3f} rad")
