"""Reverse-mode gradients through a full run, using segment checkpointing, plus a finite-difference oracle."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import objective
from .design import DesignVariables, symmetrize
from .errors import GradientError
from .stepper import SimState, Simulator

log = logging.getLogger(__name__)


@dataclass
class Multipliers:
    lam: dict
    sigma: dict
    active: dict

    @classmethod
    def initial(cls, sigma0: float = 1.0, lam0: float = 0.0, soft_active: bool = False):
        keys = objective.CONSTRAINTS
        active = {k: True for k in keys}
        active["soft"] = soft_active
        return cls({k: lam0 for k in keys}, {k: sigma0 for k in keys}, active)

    def copy(self) -> "Multipliers":
        return Multipliers(dict(self.lam), dict(self.sigma), dict(self.active))


@dataclass
class Evaluation:
    report: objective.ObjectiveReport
    seeds: objective.ObjectiveSeeds
    run: object


def evaluate_design(sim: Simulator, design: DesignVariables, mult: Multipliers, record: bool = False,
                    checkpoint: bool = True) -> Evaluation:
    """Forward run and objective for ``design``."""
    sim.set_design(design)
    cfg = sim.cfg
    ns, ne = cfg.n_start, sim.n_steps
    run = sim.run(keep_steps=(0, ns, ne), record=record, checkpoint=checkpoint)
    s0, ss, se = run.snapshots[0], run.snapshots[ns], run.snapshots[ne]
    report, seeds = objective.evaluate(
        s0.x, s0.node_x, ss.x, ss.node_x, se.x, se.node_x, sim.p_mass, sim.net.node_m, sim.phi_hat,
        design.gamma, design.w, cfg.optimizer, mult.lam, mult.sigma, mult.active, sim.gs.n_designable,
        steps=(0, ns, ne))
    return Evaluation(report, seeds, run)


def loss(sim: Simulator, design: DesignVariables, mult: Multipliers) -> float:
    return evaluate_design(sim, design, mult, checkpoint=False).report.L_total


def backward_pass(sim: Simulator, ev: Evaluation, symmetric: bool = True) -> DesignVariables:
    """Gradient of ``L_total`` w.r.t. (phi, gamma, w) for the forward run in ``ev``.

    Segments are replayed from their checkpoints (last first); each replay is
    hash-checked against the stored state at its end.
    """
    run, seeds = ev.run, ev.seeds
    store = run.store
    n_total = run.n_steps
    acc = sim.new_accumulators()
    fin = run.final
    bar = SimState(np.zeros_like(fin.x), np.zeros_like(fin.v), np.zeros_like(fin.C), np.zeros_like(fin.F),
                   np.zeros_like(fin.node_x), np.zeros_like(fin.node_v), n_total, sim.dt)

    def seed(b: SimState, n: int):
        if n in seeds.state_x:
            gp, gn = seeds.state_x[n]
            b.x += gp
            b.node_x += gn

    seed(bar, n_total)
    peak = 0
    for start, end in reversed(store.segments(n_total)):
        states = sim.replay(store, start, end)
        peak = max(peak, len(store.states) + len(states) - 1)   # states[0] is a stored checkpoint
        for n in range(end - 1, start - 1, -1):
            bar = sim.step_adjoint(states[n - start], bar, acc)
            seed(bar, n)
        for name, arr in (("x", bar.x), ("v", bar.v), ("F", bar.F), ("node_x", bar.node_x)):
            if not np.all(np.isfinite(arr)):
                raise GradientError(f"non-finite adjoint in {name}", step=start)
        del states
    store.peak_live = peak

    inv_m = sim.inv_m
    node_m_bar = acc["node_m"] - acc["inv_m"] * inv_m * inv_m + seeds.node_m
    mass_bar = acc["mass"] + seeds.mass
    g = sim.design_pullback(mass_bar, acc["mu"], acc["lam"], acc["eta"], seeds.phi_hat, node_m_bar,
                            acc["kappa"], acc["V"])
    g.gamma = g.gamma + seeds.gamma
    g.w = g.w + seeds.w
    for name, arr in (("phi", g.phi), ("gamma", g.gamma), ("w", g.w)):
        if not np.all(np.isfinite(arr)):
            raise GradientError(f"non-finite gradient for {name}")
    if symmetric and sim.symmetry is not None:
        g.phi = symmetrize(g.phi, sim.symmetry.particle_mirror)
        g.gamma = symmetrize(g.gamma, sim.symmetry.bar_mirror)
    return g


def loss_and_grad(sim: Simulator, design: DesignVariables, mult: Multipliers, symmetric: bool = True,
                  record: bool = False):
    ev = evaluate_design(sim, design, mult, record=record)
    return ev, backward_pass(sim, ev, symmetric=symmetric)


@dataclass
class FDResult:
    index: np.ndarray
    analytic: np.ndarray
    numeric: np.ndarray
    rel_error: np.ndarray

    @property
    def max_rel(self) -> float:
        return float(self.rel_error.max()) if len(self.rel_error) else 0.0

    @property
    def median_rel(self) -> float:
        return float(np.median(self.rel_error)) if len(self.rel_error) else 0.0

    def fraction_below(self, tol: float) -> float:
        return float(np.mean(self.rel_error < tol)) if len(self.rel_error) else 1.0


def relative_error(analytic, numeric, eps: float = 1e-12):
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), eps)


def finite_difference_check(loss_fn, x0, grad, subset, h: float = 1e-4, eps: float = 1e-12) -> FDResult:
    """Central differences of ``loss_fn`` (a function of a flat vector) at ``subset`` entries."""
    x0 = np.asarray(x0, dtype=float)
    grad = np.asarray(grad, dtype=float)
    subset = np.asarray(subset, dtype=int)
    num = np.empty(len(subset))
    for k, i in enumerate(subset):
        xp = x0.copy()
        xp[i] += h
        xm = x0.copy()
        xm[i] -= h
        num[k] = (loss_fn(xp) - loss_fn(xm)) / (2.0 * h)
    ana = grad[subset]
    return FDResult(subset, ana, num, relative_error(ana, num, eps))


def design_fd_check(sim: Simulator, design: DesignVariables, mult: Multipliers, subset, h: float = 1e-4):
    """Adjoint vs central differences on the flattened design vector."""
    _, g = loss_and_grad(sim, design, mult, symmetric=False)

    def f(vec):
        return loss(sim, design.with_flat(vec), mult)

    res = finite_difference_check(f, design.flat(), g.flat(), subset, h)
    sim.set_design(design)
    return res
