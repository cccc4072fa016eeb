"""Adam updates, augmented-Lagrangian schedule and the outer co-design loop."""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .design import DesignVariables, enforce_symmetry
from .errors import BlowUpError, InversionError, SafeBandError, SoftRigidError
from .gradients import Multipliers, loss_and_grad
from .objective import CONSTRAINTS

log = logging.getLogger(__name__)

GROUPS = ("phi", "gamma", "w")
BOXES = {"phi": (-1.0, 1.0), "gamma": (0.0, 1.0), "w": (0.0, 1.0)}


@dataclass
class AdamState:
    m: dict
    v: dict
    t: int = 0

    @classmethod
    def zeros_like(cls, design: DesignVariables) -> "AdamState":
        return cls({k: np.zeros_like(getattr(design, k)) for k in GROUPS},
                   {k: np.zeros_like(getattr(design, k)) for k in GROUPS}, 0)

    def copy(self) -> "AdamState":
        return AdamState({k: a.copy() for k, a in self.m.items()}, {k: a.copy() for k, a in self.v.items()}, self.t)


@dataclass
class OptimState:
    adam: AdamState
    mult: Multipliers
    iteration: int = 0
    losses: list = field(default_factory=list)
    gate_latched: bool = False
    failures: int = 0
    step_scale: float = 1.0


def adam_update(design: DesignVariables, grads: DesignVariables, lr: dict, state: AdamState, beta1=0.9,
                beta2=0.999, eps=1e-8, mirror: dict | None = None, scale: float = 1.0) -> DesignVariables:
    """One Adam step per group, then box clamp, then exact mirror symmetry.

    ``state`` is updated in place; the returned design is new.
    """
    for k in GROUPS:
        if not np.all(np.isfinite(getattr(grads, k))):
            raise SoftRigidError(f"non-finite gradient in {k}; update rejected")
    state.t += 1
    out = design.copy()
    for k in GROUPS:
        g = getattr(grads, k)
        state.m[k] = beta1 * state.m[k] + (1 - beta1) * g
        state.v[k] = beta2 * state.v[k] + (1 - beta2) * g * g
        mh = state.m[k] / (1 - beta1 ** state.t)
        vh = state.v[k] / (1 - beta2 ** state.t)
        new = getattr(out, k) - scale * lr[k] * mh / (np.sqrt(vh) + eps)
        lo, hi = BOXES[k]
        new = np.clip(new, lo, hi)
        if mirror and mirror.get(k) is not None:
            new = enforce_symmetry(new, mirror[k])
        setattr(out, k, new)
    return out


def stationarity(losses, window: int = 5, tol: float = 1e-3, eps: float = 1e-12) -> bool:
    """Relative change between the means of the last two windows is below ``tol``."""
    if len(losses) < 2 * window:
        return False
    last = float(np.mean(losses[-window:]))
    prev = float(np.mean(losses[-2 * window:-window]))
    return abs(last - prev) / max(abs(prev), eps) < tol


def al_schedule(state: OptimState, report, window=5, tol=1e-3, growth=2.0, sigma_max=1e4) -> OptimState:
    """Latch the soft-constraint gate and, on stationarity, grow penalties and update multipliers."""
    mult = state.mult
    if report.C["bone"] <= 0.0 and not state.gate_latched:
        state.gate_latched = True
        mult.active["soft"] = True
        log.info("bone binarization satisfied; soft constraint enabled")
    if stationarity(state.losses, window, tol):
        for k in CONSTRAINTS:
            if not mult.active[k]:
                continue
            mult.lam[k] = min(0.0, mult.lam[k] - mult.sigma[k] * max(report.C[k], 0.0))
            mult.sigma[k] = min(sigma_max, growth * mult.sigma[k])
        state.losses.clear()
        log.info("stationary: sigma -> %s", {k: round(v, 4) for k, v in mult.sigma.items()})
    return state


LOG_FIELDS = ["iteration", "L_total", "L_x", "D_soft", "D_bone", "C_soft", "C_bone", "C_act", "C_Nbone",
              "lam_soft", "lam_bone", "lam_act", "lam_Nbone", "sigma_soft", "sigma_bone", "sigma_act",
              "sigma_Nbone", "soft_active", "wall_s"]


def _log_row(it, report, wall):
    row = dict(iteration=it, L_total=report.L_total, L_x=report.L_x, D_soft=report.D_soft, D_bone=report.D_bone,
               soft_active=int(report.active["soft"]), wall_s=wall)
    for k in CONSTRAINTS:
        row[f"C_{k}"] = report.C[k]
        row[f"lam_{k}"] = report.lam[k]
        row[f"sigma_{k}"] = report.sigma[k]
    return row


@dataclass
class History:
    rows: list = field(default_factory=list)
    skipped: int = 0

    def column(self, name):
        return np.array([r[name] for r in self.rows])


def save_snapshot(path, design: DesignVariables, state: OptimState, seed: int = 0) -> None:
    meta = dict(iteration=state.iteration, t=state.adam.t, losses=state.losses, gate=state.gate_latched,
                failures=state.failures, step_scale=state.step_scale, lam=state.mult.lam,
                sigma=state.mult.sigma, active=state.mult.active, seed=seed,
                rng=np.random.default_rng(seed).bit_generator.state)
    arrays = {f"var_{k}": getattr(design, k) for k in GROUPS}
    arrays.update({f"m_{k}": state.adam.m[k] for k in GROUPS})
    arrays.update({f"v_{k}": state.adam.v[k] for k in GROUPS})
    np.savez(path, meta=np.array(json.dumps(meta)), **arrays)


def load_snapshot(path):
    with np.load(path, allow_pickle=False) as z:
        meta = json.loads(str(z["meta"]))
        design = DesignVariables(z["var_phi"].copy(), z["var_gamma"].copy(), z["var_w"].copy())
        adam = AdamState({k: z[f"m_{k}"].copy() for k in GROUPS}, {k: z[f"v_{k}"].copy() for k in GROUPS},
                         int(meta["t"]))
    mult = Multipliers(meta["lam"], meta["sigma"], meta["active"])
    st = OptimState(adam, mult, int(meta["iteration"]), list(meta["losses"]), bool(meta["gate"]),
                    int(meta["failures"]), float(meta["step_scale"]))
    return design, st


def initial_state(sim, design=None):
    o = sim.cfg.optimizer
    design = sim.initial_design() if design is None else design
    mult = Multipliers.initial(o.sigma_init, o.lambda_init, soft_active=False)
    return design, OptimState(AdamState.zeros_like(design), mult)


def optimize(sim, budget: int, design: DesignVariables | None = None, state: OptimState | None = None,
             log_path=None, snapshot_path=None, callback=None):
    """Run ``budget`` co-design iterations; returns ``(design, state, history)``.

    A failed forward run (blow-up, inversion, particle leaving the grid) rolls the
    variables back to the last good design and halves the step; five failures in
    a row abort.
    """
    o = sim.cfg.optimizer
    if state is None:
        design, state = initial_state(sim, design)
    lr = {"phi": o.lr_soft, "gamma": o.lr_bone, "w": o.lr_act}
    mirror = None
    if sim.symmetry is not None:
        mirror = {"phi": sim.symmetry.particle_mirror, "gamma": sim.symmetry.bar_mirror, "w": None}
        design = DesignVariables(enforce_symmetry(design.phi, mirror["phi"]),
                                 enforce_symmetry(design.gamma, mirror["gamma"]), design.w.copy())
    history = History()
    writer = None
    fh = None
    if log_path is not None:
        new = not Path(log_path).exists()
        fh = open(log_path, "a", newline="")
        writer = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
        if new:
            writer.writeheader()
    good = design.copy()
    good_adam = state.adam.copy()
    pending = None     # (design before update, grads) to retry after failure
    try:
        done = 0
        while done < budget:
            t0 = time.perf_counter()
            try:
                ev, g = loss_and_grad(sim, design, state.mult)
            except (BlowUpError, InversionError, SafeBandError) as exc:
                state.failures += 1
                history.skipped += 1
                log.warning("iteration %d failed (%s); rolling back", state.iteration, exc)
                if state.failures >= o.max_failures:
                    raise SoftRigidError(f"{state.failures} consecutive failed iterations") from exc
                state.step_scale *= 0.5
                state.adam = good_adam.copy()
                if pending is None:
                    raise
                base, grads = pending
                design = adam_update(base, grads, lr, state.adam, o.beta1, o.beta2, o.adam_eps, mirror,
                                     state.step_scale)
                continue
            state.failures = 0
            state.step_scale = 1.0
            rep = ev.report
            wall = time.perf_counter() - t0
            row = _log_row(state.iteration, rep, wall)
            history.rows.append(row)
            if writer is not None:
                writer.writerow(row)
                fh.flush()
            log.info("iter %d  L=%.5g  L_x=%.4g mm  D=(%.3g, %.3g) mm  C_bone=%.3g  (%.1f s)", state.iteration,
                     rep.L_total, 1e3 * rep.L_x, 1e3 * rep.D_soft, 1e3 * rep.D_bone, rep.C["bone"], wall)
            state.losses.append(rep.L_total)
            good = design.copy()
            good_adam = state.adam.copy()
            pending = (good, g)
            design = adam_update(design, g, lr, state.adam, o.beta1, o.beta2, o.adam_eps, mirror)
            al_schedule(state, rep, o.stationarity_window, o.stationarity_tol, o.sigma_growth, o.sigma_max)
            state.iteration += 1
            done += 1
            if snapshot_path is not None:
                save_snapshot(snapshot_path, design, state, sim.cfg.seed)
            if callback is not None:
                callback(state, rep, design)
    finally:
        if fh is not None:
            fh.close()
    sim.set_design(design)
    return design, state, history
