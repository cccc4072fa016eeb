"""File formats: trajectory/design CSV, actuation CSV and binary particle snapshots.

All formats are described in ``docs/file_formats.md``.
"""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .design import DesignVariables
from .errors import SoftRigidError

SNAPSHOT_MAGIC = b"SRSNAP01"
SNAPSHOT_DTYPE = np.dtype([("id", "<i8"), ("x", "<f8"), ("y", "<f8"), ("z", "<f8"), ("phi_hat", "<f8")])


def _fmt(v) -> str:
    return repr(float(v))


def _outdir(path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise SoftRigidError(f"cannot create output directory {p}: {exc}") from None
    return p


def trajectory_header(n_probes: int, probe_ids, n_act: int):
    cols = ["t_s"]
    for i in probe_ids:
        cols += [f"probe{i}_x_m", f"probe{i}_y_m", f"probe{i}_z_m"]
    cols += ["cg_x_m", "cg_y_m", "cg_z_m"]
    cols += [f"V_in_{a}" for a in range(n_act)]
    return cols


def write_trajectory(traj, path) -> Path:
    t, px, cg, V = traj.as_arrays()
    path = Path(path)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(trajectory_header(len(traj.probes), traj.probes, V.shape[1]))
            for k in range(len(t)):
                row = [_fmt(t[k])]
                for p in range(px.shape[1]):
                    row += [_fmt(c) for c in px[k, p]]
                row += [_fmt(c) for c in cg[k]]
                row += [_fmt(c) for c in V[k]]
                w.writerow(row)
    except OSError as exc:
        raise SoftRigidError(f"cannot write {path}: {exc}") from None
    return path


def read_trajectory(path) -> dict:
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(v) for v in row] for row in r]).reshape(-1, len(header))
    return {h: data[:, i] for i, h in enumerate(header)}


DESIGN_COLUMNS = ["kind", "id", "x_m", "y_m", "z_m", "phi", "phi_hat", "node_a", "node_b", "gamma",
                  "actuator", "pulse", "w"]


def write_design(path, design: DesignVariables, rest_positions, phi_hat, bar_a, bar_b, bar_ids=None) -> Path:
    """Particles, designable bars and pulse weights in one lossless CSV."""
    path = Path(path)
    rest = np.asarray(rest_positions, dtype=float).reshape(-1, 3)
    bar_ids = np.arange(len(design.gamma)) if bar_ids is None else np.asarray(bar_ids)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=DESIGN_COLUMNS, restval="")
            w.writeheader()
            for i in range(len(design.phi)):
                w.writerow(dict(kind="particle", id=i, x_m=_fmt(rest[i, 0]), y_m=_fmt(rest[i, 1]),
                                z_m=_fmt(rest[i, 2]), phi=_fmt(design.phi[i]), phi_hat=_fmt(phi_hat[i])))
            for k in range(len(design.gamma)):
                w.writerow(dict(kind="bar", id=int(bar_ids[k]), node_a=int(bar_a[k]), node_b=int(bar_b[k]),
                                gamma=_fmt(design.gamma[k])))
            n_act, n_pulse = design.w.shape
            for a in range(n_act):
                for k in range(n_pulse):
                    w.writerow(dict(kind="pulse", id=a * n_pulse + k, actuator=a, pulse=k, w=_fmt(design.w[a, k])))
    except OSError as exc:
        raise SoftRigidError(f"cannot write {path}: {exc}") from None
    return path


def read_design(path) -> DesignVariables:
    phi, gamma, pulses = [], [], []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            kind = row["kind"]
            if kind == "particle":
                phi.append(float(row["phi"]))
            elif kind == "bar":
                gamma.append(float(row["gamma"]))
            elif kind == "pulse":
                pulses.append((int(row["actuator"]), int(row["pulse"]), float(row["w"])))
            else:
                raise SoftRigidError(f"unknown row kind {kind!r} in {path}")
    n_act = 1 + max((p[0] for p in pulses), default=-1)
    n_pulse = 1 + max((p[1] for p in pulses), default=-1)
    w = np.zeros((n_act, max(n_pulse, 0)))
    for a, k, v in pulses:
        w[a, k] = v
    return DesignVariables(np.array(phi), np.array(gamma), w)


def write_voltage(path, t, V) -> Path:
    V = np.asarray(V, dtype=float).reshape(len(t), -1)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t_s"] + [f"V_in_{a}" for a in range(V.shape[1])])
        for k in range(len(t)):
            w.writerow([_fmt(t[k])] + [_fmt(v) for v in V[k]])
    return Path(path)


def write_snapshot(path, x, phi_hat, step: int, t: float) -> Path:
    """Fixed-layout binary particle dump: magic, header (step i8, t f8, n i8), then records."""
    x = np.asarray(x, dtype=float).reshape(-1, 3)
    rec = np.empty(len(x), dtype=SNAPSHOT_DTYPE)
    rec["id"] = np.arange(len(x))
    rec["x"], rec["y"], rec["z"] = x[:, 0], x[:, 1], x[:, 2]
    rec["phi_hat"] = phi_hat
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(np.array([step], "<i8").tobytes())
        fh.write(np.array([t], "<f8").tobytes())
        fh.write(np.array([len(x)], "<i8").tobytes())
        fh.write(rec.tobytes())
    return Path(path)


def read_snapshot(path):
    raw = Path(path).read_bytes()
    if raw[:8] != SNAPSHOT_MAGIC:
        raise SoftRigidError(f"{path} is not a particle snapshot")
    step = int(np.frombuffer(raw, "<i8", 1, 8)[0])
    t = float(np.frombuffer(raw, "<f8", 1, 16)[0])
    n = int(np.frombuffer(raw, "<i8", 1, 24)[0])
    rec = np.frombuffer(raw, SNAPSHOT_DTYPE, n, 32)
    return step, t, rec


def export_trajectory(traj, sim, out_dir, snapshots: dict | None = None) -> dict:
    """Write ``trajectory.csv``, ``design.csv`` and optional per-checkpoint particle snapshots."""
    out = _outdir(out_dir)
    files = {"trajectory": write_trajectory(traj, out / "trajectory.csv")}
    files["design"] = export_design(sim, out)
    for step, st in sorted((snapshots or {}).items()):
        files[f"snapshot_{step}"] = write_snapshot(out / f"particles_{step:07d}.bin", st.x, sim.phi_hat, step, st.t)
    return files


def export_design(sim, out_dir) -> Path:
    out = _outdir(out_dir)
    des = sim.gs.designable_index
    return write_design(out / "design.csv", sim.design, sim.x0, sim.phi_hat, sim.gs.bar_a[des], sim.gs.bar_b[des],
                        bar_ids=des)
