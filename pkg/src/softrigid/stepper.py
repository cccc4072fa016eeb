"""Coupled soft/skeleton time stepping, phase scheduling and checkpointing.

One step, in order:

1. soft particles scatter to the grid (APIC + fused stress);
2. actuator forces at the previous node positions, explicit prediction and one
   XPBD projection sweep give the corrected node velocity ``v*``;
3. nodes whose stencil already holds soft mass scatter ``m (v* - g dt)``;
4. grid update (normalize, gravity, floor contact, walls);
5. particles gather from the grid;
6. coupled nodes gather the grid velocity, the rest keep ``v*``;
   positions advance as ``x_prev + dt v``.

Gravity is removed from the scattered node momentum because the grid adds it
again in step 4.
"""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from . import mpm, xpbd
from .actuation import VoltageTable
from .design import (DesignVariables, filter_density, filter_matrix, project_density,
                     project_density_grad, simp_slope, simp_soft)
from .errors import BlowUpError, CheckpointError, InversionError, SafeBandError, SoftRigidError
from .mpm import SoftMaterial, _stencil
from .scene import SceneConfig, build_ground_structure, build_symmetry_map
from .xpbd import BarNetwork, weak_axis_inertia

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# state


@dataclass
class SimState:
    """Dynamic state at an integer step; ``t = step_index * dt``."""

    x: np.ndarray
    v: np.ndarray
    C: np.ndarray
    F: np.ndarray
    node_x: np.ndarray
    node_v: np.ndarray
    step_index: int
    dt: float

    @property
    def t(self) -> float:
        return self.step_index * self.dt

    def copy(self) -> "SimState":
        return SimState(self.x.copy(), self.v.copy(), self.C.copy(), self.F.copy(), self.node_x.copy(),
                        self.node_v.copy(), self.step_index, self.dt)

    def digest(self) -> str:
        h = hashlib.sha256()
        for a in (self.x, self.v, self.C, self.F, self.node_x, self.node_v):
            h.update(np.ascontiguousarray(a).tobytes())
        h.update(str(self.step_index).encode())
        return h.hexdigest()

    def max_speed(self) -> float:
        s = 0.0
        if len(self.v):
            s = float(np.sqrt(np.max(np.einsum("ij,ij->i", self.v, self.v))))
        if len(self.node_v):
            s = max(s, float(np.sqrt(np.max(np.einsum("ij,ij->i", self.node_v, self.node_v)))))
        return s


def seed_particles(cfg: SceneConfig):
    """Regular lattice at ``dx/2`` pitch filling the soft box, centered so it stays mirror symmetric."""
    if not cfg.soft_body.enabled:
        return np.zeros((0, 3)), 0.0
    pitch = 0.5 * cfg.dx
    lo = np.asarray(cfg.soft_body.box_min_m, dtype=float)
    hi = np.asarray(cfg.soft_body.box_max_m, dtype=float)
    counts = np.floor((hi - lo) / pitch + 1e-9).astype(int)
    if np.any(counts < 1):
        raise SoftRigidError(f"soft box {hi - lo} is smaller than one particle spacing ({pitch:g} m)")
    start = lo + 0.5 * ((hi - lo) - counts * pitch) + 0.5 * pitch
    axes = [start[d] + pitch * np.arange(counts[d]) for d in range(3)]
    X = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return X, pitch ** 3


def network_from_structure(cfg: SceneConfig, gs) -> BarNetwork:
    """Turn a ground structure into an XPBD network with per-bar material data."""
    from .scene import ROLE_CODES

    nb = gs.n_bars
    bone = gs.role == ROLE_CODES["bone"]
    E = np.full(nb, cfg.skeleton.bone.E_Pa)
    A = gs.section[:, 0] * gs.section[:, 1] if nb else np.zeros(0)
    I = np.array([weak_axis_inertia(b, h) for b, h in gs.section]) if nb else np.zeros(0)
    kmax = E * A
    unit_of = np.full(nb, -1, dtype=np.int64)
    for u, unit in enumerate(gs.units):
        for s in unit.axial_bars:
            unit_of[s] = u
    units = gs.units
    half = np.array([0.5 * u.F_max for u in units])   # two axial bars share the unit force
    net = BarNetwork(
        node_x=gs.node_x.copy(),
        node_v=np.tile(np.asarray(cfg.skeleton.node_velocity_m_s, dtype=float), (gs.n_nodes, 1)),
        node_m=np.zeros(gs.n_nodes),
        fixed_mass=gs.fixed_mass.copy(),
        pinned=gs.pinned.copy(),
        bar_a=gs.bar_a.copy(),
        bar_b=gs.bar_b.copy(),
        L_ref=gs.L_ref.copy(),
        kappa=kmax.copy(),
        kappa_max=kmax,
        kappa_min=np.zeros(nb),
        role=gs.role.copy(),
        gamma=np.ones(nb),
        Lambda=np.zeros(nb),
        E_s=E,
        I_s=I,
        K_b=np.full(nb, cfg.skeleton.bone.K_b),
        rho=np.full(nb, cfg.skeleton.bone.rho_kg_m3),
        area=A,
        act_unit=unit_of,
        unit_L0=np.array([u.L0 for u in units]),
        unit_dL=np.array([u.dL for u in units]),
        unit_Lcore=np.array([u.L_core for u in units]),
        unit_Fscale=half,
        unit_kfree=np.array([u.kappa_free for u in units]),
        unit_kact=np.array([u.kappa_act for u in units]),
    )
    net.kappa_min[~bone] = net.kappa_max[~bone]
    return net


# ---------------------------------------------------------------------------
# node <-> grid kernels


@njit(cache=True)
def _node_flags(gm, xn, m, pinned, thr, dx, flags):
    inv_dx = 1.0 / dx
    shape = gm.shape
    w = np.empty((3, 3))
    dw = np.empty((3, 3))
    fx = np.empty(3)
    for n in range(xn.shape[0]):
        flags[n] = False
        if pinned[n]:
            continue
        b0, b1, b2 = _stencil(xn[n], inv_dx, shape, w, dw, fx)
        if b0 < 0:
            continue
        s = 0.0
        for i in range(3):
            for j in range(3):
                for l in range(3):
                    s += gm[b0 + i, b1 + j, b2 + l]
        flags[n] = s > thr * m[n]


@njit(cache=True)
def _node_scatter(xn, m, vstar, flags, gravity, dt, dx, gm, gp):
    inv_dx = 1.0 / dx
    shape = gm.shape
    w = np.empty((3, 3))
    dw = np.empty((3, 3))
    fx = np.empty(3)
    u = np.empty(3)
    for n in range(xn.shape[0]):
        if not flags[n]:
            continue
        b0, b1, b2 = _stencil(xn[n], inv_dx, shape, w, dw, fx)
        for a in range(3):
            u[a] = vstar[n, a] - gravity[a] * dt
        for i in range(3):
            for j in range(3):
                for l in range(3):
                    W = w[i, 0] * w[j, 1] * w[l, 2]
                    gm[b0 + i, b1 + j, b2 + l] += W * m[n]
                    for a in range(3):
                        gp[b0 + i, b1 + j, b2 + l, a] += W * m[n] * u[a]


@njit(cache=True)
def _node_scatter_adjoint(xn, m, vstar, flags, gravity, dt, dx, gm_bar, gp_bar, xn_bar, m_bar, vstar_bar):
    inv_dx = 1.0 / dx
    shape = gm_bar.shape
    w = np.empty((3, 3))
    dw = np.empty((3, 3))
    fx = np.empty(3)
    u = np.empty(3)
    for n in range(xn.shape[0]):
        if not flags[n]:
            continue
        b0, b1, b2 = _stencil(xn[n], inv_dx, shape, w, dw, fx)
        for a in range(3):
            u[a] = vstar[n, a] - gravity[a] * dt
        for i in range(3):
            for j in range(3):
                for l in range(3):
                    I0 = b0 + i
                    I1 = b1 + j
                    I2 = b2 + l
                    W = w[i, 0] * w[j, 1] * w[l, 2]
                    q = gm_bar[I0, I1, I2]
                    for a in range(3):
                        q += u[a] * gp_bar[I0, I1, I2, a]
                        vstar_bar[n, a] += W * m[n] * gp_bar[I0, I1, I2, a]
                    m_bar[n] += W * q
                    s = m[n] * q * inv_dx
                    xn_bar[n, 0] += s * dw[i, 0] * w[j, 1] * w[l, 2]
                    xn_bar[n, 1] += s * w[i, 0] * dw[j, 1] * w[l, 2]
                    xn_bar[n, 2] += s * w[i, 0] * w[j, 1] * dw[l, 2]


@njit(cache=True)
def _node_gather(gv, xn, flags, vstar, dx, dt, x_out, v_out):
    inv_dx = 1.0 / dx
    shape = gv.shape[:3]
    w = np.empty((3, 3))
    dw = np.empty((3, 3))
    fx = np.empty(3)
    for n in range(xn.shape[0]):
        if flags[n]:
            b0, b1, b2 = _stencil(xn[n], inv_dx, shape, w, dw, fx)
            for a in range(3):
                v_out[n, a] = 0.0
            for i in range(3):
                for j in range(3):
                    for l in range(3):
                        W = w[i, 0] * w[j, 1] * w[l, 2]
                        for a in range(3):
                            v_out[n, a] += W * gv[b0 + i, b1 + j, b2 + l, a]
        else:
            for a in range(3):
                v_out[n, a] = vstar[n, a]
        for a in range(3):
            x_out[n, a] = xn[n, a] + dt * v_out[n, a]


@njit(cache=True)
def _node_gather_adjoint(gv, xn, flags, dx, dt, x_out_bar, v_out_bar, gv_bar, xn_bar, vstar_bar):
    inv_dx = 1.0 / dx
    shape = gv.shape[:3]
    w = np.empty((3, 3))
    dw = np.empty((3, 3))
    fx = np.empty(3)
    vb = np.empty(3)
    for n in range(xn.shape[0]):
        for a in range(3):
            vb[a] = v_out_bar[n, a] + dt * x_out_bar[n, a]
            xn_bar[n, a] += x_out_bar[n, a]
        if not flags[n]:
            for a in range(3):
                vstar_bar[n, a] += vb[a]
            continue
        b0, b1, b2 = _stencil(xn[n], inv_dx, shape, w, dw, fx)
        for i in range(3):
            for j in range(3):
                for l in range(3):
                    I0 = b0 + i
                    I1 = b1 + j
                    I2 = b2 + l
                    W = w[i, 0] * w[j, 1] * w[l, 2]
                    q = 0.0
                    for a in range(3):
                        gv_bar[I0, I1, I2, a] += W * vb[a]
                        q += gv[I0, I1, I2, a] * vb[a]
                    q *= inv_dx
                    xn_bar[n, 0] += q * dw[i, 0] * w[j, 1] * w[l, 2]
                    xn_bar[n, 1] += q * w[i, 0] * dw[j, 1] * w[l, 2]
                    xn_bar[n, 2] += q * w[i, 0] * w[j, 1] * dw[l, 2]


# ---------------------------------------------------------------------------
# checkpoints


@dataclass
class CheckpointStore:
    interval: int = 250
    states: dict = field(default_factory=dict)
    digests: dict = field(default_factory=dict)
    peak_live: int = 0

    def save(self, state: SimState) -> None:
        self.states[state.step_index] = state.copy()
        self.digests[state.step_index] = state.digest()

    def segments(self, n_total: int):
        """``(start, end)`` step ranges covering ``[0, n_total)``."""
        return [(s, min(s + self.interval, n_total)) for s in range(0, n_total, self.interval)]

    def load(self, step: int) -> SimState:
        if step not in self.states:
            raise CheckpointError(f"no checkpoint at step {step}")
        st = self.states[step]
        if st.digest() != self.digests[step]:
            raise CheckpointError(f"checkpoint at step {step} was modified (hash mismatch)")
        return st.copy()


# ---------------------------------------------------------------------------
# trajectory


@dataclass
class Trajectory:
    dt: float
    decimate: int
    probes: list
    t: list = field(default_factory=list)
    probe_x: list = field(default_factory=list)
    cg: list = field(default_factory=list)
    voltage: list = field(default_factory=list)

    def as_arrays(self):
        n_probe = len(self.probes)
        return (np.asarray(self.t), np.asarray(self.probe_x).reshape(len(self.t), n_probe, 3),
                np.asarray(self.cg).reshape(-1, 3), np.asarray(self.voltage).reshape(len(self.t), -1))

    def cg_at(self, t: float) -> np.ndarray:
        tt = np.asarray(self.t)
        k = np.flatnonzero(np.abs(tt - t) <= 0.5 * self.dt)
        if not len(k):
            raise SoftRigidError(f"trajectory has no sample at t = {t:g} s")
        return np.asarray(self.cg[k[0]])


@dataclass
class ForwardRun:
    store: CheckpointStore
    final: SimState
    snapshots: dict          # step -> SimState for the objective's sample steps
    trajectory: Trajectory | None
    n_steps: int


# ---------------------------------------------------------------------------
# simulator


class Simulator:
    """Holds one scene's static data and the design-dependent physical parameters."""

    def __init__(self, cfg: SceneConfig, gs=None):
        self.cfg = cfg
        self.dx = cfg.dx
        self.dt = cfg.dt
        self.gravity = cfg.gravity
        self.floor = cfg.floor_height
        self.grid_shape = cfg.grid_shape
        self.gs = gs if gs is not None else build_ground_structure(cfg)
        self.x0, self.vol0 = seed_particles(cfg)
        self.n_particles = len(self.x0)
        self.material = SoftMaterial(cfg.soft_body.material.E_Pa, cfg.soft_body.material.nu,
                                     cfg.soft_body.material.rho_kg_m3, cfg.soft_body.material.eta_visc_Pa_s,
                                     cfg.soft_body.material.floor_ratio)
        self.H = filter_matrix(self.x0, cfg.design.filter_radius_m, cfg.design.filter_exponent) \
            if self.n_particles else None
        self.net = network_from_structure(cfg, self.gs)
        self.n_units = len(self.gs.units)
        sig = cfg.actuators.signal
        self.table = VoltageTable(cfg.n_pulses, self.dt, cfg.n_start, cfg.n_end, cfg.cycle_steps,
                                  sig.pulse_dt_s, sig.pulse_sigma_s, sig.pulse_amp, sig.ceiling, sig.sharpness)
        self.n_steps = cfg.n_end
        self.symmetry = None
        if cfg.soft_body.enabled:
            try:
                self.symmetry = build_symmetry_map(self.gs, _Pts(self.x0), cfg.sagittal_y)
            except SoftRigidError as exc:
                log.info("no sagittal symmetry: %s", exc)
        self.design = None
        self.set_design(self.initial_design())

    # -- design ---------------------------------------------------------
    def initial_design(self) -> DesignVariables:
        o = self.cfg.optimizer
        return DesignVariables(np.full(self.n_particles, o.init_phi), np.full(self.gs.n_designable, o.init_gamma),
                               np.full((self.n_units, self.cfg.n_pulses), o.init_w))

    def set_design(self, design: DesignVariables) -> None:
        self.design = design
        if self.n_particles:
            self.phi_bar = filter_density(design.phi, self.H)
            self.phi_hat = project_density(self.phi_bar, self.cfg.design.beta)
            rho, mu, lam, eta = simp_soft(self.phi_hat, self.material)
            self.p_mass = rho * self.vol0
            self.p_mu, self.p_lam, self.p_eta = mu, lam, eta
        else:
            self.phi_bar = self.phi_hat = np.zeros(0)
            self.p_mass = self.p_mu = self.p_lam = self.p_eta = np.zeros(0)
        des = self.gs.designable_index
        self.net.gamma[:] = 1.0
        self.net.gamma[des] = design.gamma
        d = self.cfg.design
        xpbd.assemble_node_masses(self.net, d.bone_eps, d.bone_p, d.bar_mass_floor, d.bar_kappa_floor)
        self.inv_m = self.net.inv_mass
        self.pcr = self.net.pcr
        if self.n_units:
            self.table.update(design.w)
        else:
            self.table.update(np.zeros((0, self.cfg.n_pulses)))

    def design_pullback(self, mass_bar, mu_bar, lam_bar, eta_bar, phi_hat_bar, node_m_bar, kappa_bar, V_bar_steps):
        """Chain per-parameter adjoints back to (phi, gamma, w)."""
        mat = self.material
        if self.n_particles:
            r = mat.floor_ratio
            ph = self.phi_hat
            g_hat = (phi_hat_bar + mass_bar * self.vol0 * simp_slope(ph, mat.rho, r)
                     + mu_bar * simp_slope(ph, mat.mu, r) + lam_bar * simp_slope(ph, mat.lam, r)
                     + eta_bar * simp_slope(ph, mat.eta, r))
            g_phi = self.H.T @ (g_hat * project_density_grad(self.phi_bar, self.cfg.design.beta))
        else:
            g_phi = np.zeros(0)
        d = self.cfg.design
        g_gamma_all = xpbd.node_mass_pullback(self.net, node_m_bar, kappa_bar, d.bone_eps, d.bone_p, d.bar_mass_floor)
        g_w = self.table.pullback(V_bar_steps) if self.n_units else np.zeros((0, self.cfg.n_pulses))
        return DesignVariables(np.asarray(g_phi), g_gamma_all, g_w)

    # -- state ----------------------------------------------------------
    def initial_state(self) -> SimState:
        n = self.n_particles
        v = np.zeros((n, 3))
        if n:
            sb = self.cfg.soft_body
            center = 0.5 * (np.asarray(sb.box_min_m) + np.asarray(sb.box_max_m))
            v += np.asarray(sb.initial_velocity_m_s, dtype=float)
            v += np.cross(np.asarray(sb.initial_angular_velocity_rad_s, dtype=float), self.x0 - center)
        F = np.tile(np.eye(3), (n, 1, 1))
        nv = self.net.node_v.copy()
        nv[self.net.pinned] = 0.0
        return SimState(self.x0.copy(), v, np.zeros((n, 3, 3)), F, self.net.node_x.copy(), nv, 0, self.dt)

    def voltage(self, n: int) -> np.ndarray:
        return self.table.at(n) if self.n_units else np.zeros(0)

    # -- one step -------------------------------------------------------
    def _forward_parts(self, s: SimState, n: int):
        """All intermediates of step ``n`` starting from ``s``."""
        net = self.net
        gm = np.zeros(self.grid_shape)
        gp = np.zeros(self.grid_shape + (3,))
        if self.n_particles:
            status, idx = mpm._p2g(s.x, s.v, s.C, s.F, self.p_mass, self.p_mu, self.p_lam, self.p_eta,
                                   self.vol0, self.dx, self.dt, gm, gp)
            _raise(status, idx, s.F, n)
        N, nb = net.n_nodes, net.n_bars
        V = self.voltage(n)
        xproj = np.empty((N, 3))
        vstar = np.empty((N, 3))
        pre = np.empty((nb, 2, 3))
        f = np.empty((N, 3))
        if N:
            skipped = xpbd._xpbd_substep(s.node_x, s.node_v, self.inv_m, net.pinned, net.bar_a, net.bar_b,
                                         net.role, net.act_unit, net.L_ref, net.kappa, net.kappa_min, self.pcr,
                                         net.unit_L0, net.unit_dL, net.unit_Lcore, net.unit_Fscale,
                                         net.unit_kfree, net.unit_kact, V, self.gravity, self.dt,
                                         xproj, vstar, pre, net.Lambda, f)
            if skipped:
                log.warning("step %d: %d bar(s) with coincident endpoints skipped", n, skipped)
        flags = np.zeros(N, dtype=np.bool_)
        if N:
            _node_flags(gm, s.node_x, net.node_m, net.pinned, self.cfg.simulation.coupling_threshold, self.dx, flags)
            _node_scatter(s.node_x, net.node_m, vstar, flags, self.gravity, self.dt, self.dx, gm, gp)
        gv = np.empty(self.grid_shape + (3,))
        mpm._grid_update(gm, gp, gv, self.gravity, self.dt, self.dx, self.floor is not None,
                         self.floor if self.floor is not None else 0.0, self.cfg.environment.friction_mu,
                         self.cfg.domain.boundary_cells)
        return dict(gm=gm, gp=gp, gv=gv, V=V, vstar=vstar, pre=pre, f=f, flags=flags)

    def step(self, s: SimState) -> SimState:
        n = s.step_index
        parts = self._forward_parts(s, n)
        out = SimState(np.empty_like(s.x), np.empty_like(s.v), np.empty_like(s.C), np.empty_like(s.F),
                       np.empty_like(s.node_x), np.empty_like(s.node_v), n + 1, self.dt)
        if self.n_particles:
            status, idx = mpm._g2p(parts["gv"], s.x, s.F, self.dx, self.dt, out.x, out.v, out.C, out.F)
            _raise(status, idx, out.F, n)
        if self.net.n_nodes:
            _node_gather(parts["gv"], s.node_x, parts["flags"], parts["vstar"], self.dx, self.dt,
                         out.node_x, out.node_v)
        speed = out.max_speed()
        cap = self.cfg.simulation.blowup_speed_m_s
        if not math.isfinite(speed) or speed > cap:
            raise BlowUpError(n + 1, speed)
        return out

    def step_adjoint(self, s: SimState, bar: SimState, acc: dict) -> SimState:
        """Pull the adjoint of the state after step ``s.step_index`` back to ``s``.

        ``acc`` collects parameter adjoints: ``mass, mu, lam, eta`` (particles),
        ``node_m``, ``inv_m``, ``kappa`` and ``V`` (dict step -> array).
        """
        n = s.step_index
        P = self._forward_parts(s, n)
        net = self.net
        out = SimState(np.zeros_like(s.x), np.zeros_like(s.v), np.zeros_like(s.C), np.zeros_like(s.F),
                       np.zeros_like(s.node_x), np.zeros_like(s.node_v), n, self.dt)
        gv_bar = np.zeros(self.grid_shape + (3,))
        N = net.n_nodes
        vstar_bar = np.zeros((N, 3))
        if N:
            _node_gather_adjoint(P["gv"], s.node_x, P["flags"], self.dx, self.dt, bar.node_x, bar.node_v,
                                 gv_bar, out.node_x, vstar_bar)
        if self.n_particles:
            mpm._g2p_adjoint(P["gv"], s.x, s.F, self.dx, self.dt, bar.x, bar.v, bar.C, bar.F, gv_bar, out.x, out.F)
        gm_bar = np.zeros(self.grid_shape)
        gp_bar = np.zeros(self.grid_shape + (3,))
        mpm._grid_update_adjoint(P["gm"], P["gp"], gv_bar, self.gravity, self.dt, self.dx, self.floor is not None,
                                 self.floor if self.floor is not None else 0.0, self.cfg.environment.friction_mu,
                                 self.cfg.domain.boundary_cells, gm_bar, gp_bar)
        if N:
            _node_scatter_adjoint(s.node_x, net.node_m, P["vstar"], P["flags"], self.gravity, self.dt, self.dx,
                                  gm_bar, gp_bar, out.node_x, acc["node_m"], vstar_bar)
            Vb = np.zeros(self.n_units)
            xpbd._xpbd_substep_adjoint(s.node_x, s.node_v, self.inv_m, net.pinned, net.bar_a, net.bar_b, net.role,
                                       net.act_unit, net.L_ref, net.kappa, net.kappa_min, self.pcr, net.unit_L0,
                                       net.unit_dL, net.unit_Lcore, net.unit_Fscale, net.unit_kfree, net.unit_kact,
                                       P["V"], self.gravity, self.dt, P["pre"], P["f"], vstar_bar, out.node_x,
                                       out.node_v, acc["inv_m"], acc["kappa"], Vb)
            if self.n_units and self.cfg.n_start <= n < self.cfg.n_end:
                acc["V"][n] = Vb
        if self.n_particles:
            mpm._p2g_adjoint(s.x, s.v, s.C, s.F, self.p_mass, self.p_mu, self.p_lam, self.p_eta, self.vol0, self.dx,
                             self.dt, gm_bar, gp_bar, out.x, out.v, out.C, out.F, acc["mass"], acc["mu"],
                             acc["lam"], acc["eta"])
        return out

    def new_accumulators(self) -> dict:
        n, N, nb = self.n_particles, self.net.n_nodes, self.net.n_bars
        return dict(mass=np.zeros(n), mu=np.zeros(n), lam=np.zeros(n), eta=np.zeros(n), node_m=np.zeros(N),
                    inv_m=np.zeros(N), kappa=np.zeros(nb), V={})

    # -- full runs ------------------------------------------------------
    def run(self, state0: SimState | None = None, n_steps: int | None = None, keep_steps=(), record: bool = False,
            probes=None, decimate: int | None = None, checkpoint: bool = True) -> ForwardRun:
        """Simulate from ``state0``; settle phase has zero voltage, then cycles repeat."""
        s = self.initial_state() if state0 is None else state0.copy()
        n_steps = self.n_steps if n_steps is None else int(n_steps)
        store = CheckpointStore(self.cfg.simulation.checkpoint_interval)
        keep = set(int(k) for k in keep_steps)
        snaps = {}
        traj = None
        if record:
            if probes is None:
                probes = self.cfg.simulation.probes
            probes = self.default_probes() if probes is None else [int(p) for p in probes]
            bad = [p for p in probes if not 0 <= p < self.net.n_nodes]
            if bad:
                raise SoftRigidError(f"probe node ids out of range: {bad}")
            traj = Trajectory(self.dt, int(decimate or self.cfg.simulation.decimate), probes)
        while True:
            n = s.step_index
            if checkpoint and n % store.interval == 0:
                store.save(s)
            if n in keep:
                snaps[n] = s.copy()
            if traj is not None and n % traj.decimate == 0:
                self._record(traj, s)
            if n >= n_steps:
                break
            s = self.step(s)
        if checkpoint:
            store.states[s.step_index] = s.copy()
            store.digests[s.step_index] = s.digest()
        return ForwardRun(store, s, snaps, traj, n_steps)

    def default_probes(self) -> list:
        """Front-most and rear-most of the lowest free skeletal nodes."""
        net = self.net
        free = np.flatnonzero(~net.pinned)
        if not len(free):
            return []
        z = net.node_x[free, 2]
        low = free[z <= z.min() + 1e-9]
        xs = net.node_x[low, 0]
        front, rear = int(low[np.argmax(xs)]), int(low[np.argmin(xs)])
        return [front] if front == rear else [front, rear]

    def _record(self, traj: Trajectory, s: SimState) -> None:
        traj.t.append(s.t)
        traj.probe_x.append(s.node_x[traj.probes].copy())
        traj.cg.append(self.center_of_mass(s))
        traj.voltage.append(self.voltage(s.step_index).copy())

    def center_of_mass(self, s: SimState) -> np.ndarray:
        M = self.p_mass.sum() + self.net.node_m.sum()
        tot = self.p_mass @ s.x if self.n_particles else np.zeros(3)
        if self.net.n_nodes:
            tot = tot + self.net.node_m @ s.node_x
        return tot / M

    def replay(self, store: CheckpointStore, start: int, end: int, verify: bool = True):
        """Recompute states ``start..end`` from the checkpoint at ``start``."""
        s = store.load(start)
        states = [s]
        for _ in range(start, end):
            s = self.step(s)
            states.append(s)
        if verify and end in store.digests and s.digest() != store.digests[end]:
            raise CheckpointError(f"replay of segment [{start}, {end}) does not reproduce the stored state")
        return states


class _Pts:
    def __init__(self, x):
        self.x = x


def checkpoint_replay(sim: Simulator, store: CheckpointStore, segment: int, n_total: int | None = None):
    """Recompute the states of checkpoint segment ``segment`` (0-based)."""
    n_total = sim.n_steps if n_total is None else n_total
    segs = store.segments(n_total)
    if not 0 <= segment < len(segs):
        raise CheckpointError(f"no segment {segment}")
    start, end = segs[segment]
    return sim.replay(store, start, end)


def run_phases(sim: Simulator, probes=None, decimate=None) -> Trajectory:
    return sim.run(record=True, probes=probes, decimate=decimate, checkpoint=False).trajectory


def _raise(status, idx, F, n):
    if status == mpm.OUT_OF_BAND:
        raise SafeBandError(int(idx), n)
    if status == mpm.INVERTED:
        raise InversionError(int(idx), float(np.linalg.det(F[idx])), n)
