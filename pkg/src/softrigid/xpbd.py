"""XPBD bar network: nodal masses, explicit prediction, one distance projection per substep."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from .design import bone_interpolation, bone_interpolation_grad

log = logging.getLogger(__name__)

BONE, ACT_AXIAL, ACT_LATERAL, BRIDGE = 0, 1, 2, 3
ROLE_NAMES = {BONE: "bone", ACT_AXIAL: "actuator_axial", ACT_LATERAL: "actuator_lateral", BRIDGE: "bridge"}


@dataclass
class BarNetwork:
    node_x: np.ndarray
    node_v: np.ndarray
    node_m: np.ndarray
    fixed_mass: np.ndarray
    pinned: np.ndarray
    bar_a: np.ndarray
    bar_b: np.ndarray
    L_ref: np.ndarray
    kappa: np.ndarray
    kappa_max: np.ndarray
    kappa_min: np.ndarray
    role: np.ndarray
    gamma: np.ndarray
    Lambda: np.ndarray
    E_s: np.ndarray
    I_s: np.ndarray
    K_b: np.ndarray
    rho: np.ndarray
    area: np.ndarray
    act_unit: np.ndarray
    # per actuator unit
    unit_L0: np.ndarray
    unit_dL: np.ndarray
    unit_Lcore: np.ndarray
    unit_Fscale: np.ndarray
    unit_kfree: np.ndarray
    unit_kact: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.node_x.shape[0]

    @property
    def n_bars(self) -> int:
        return self.bar_a.shape[0]

    @property
    def pcr(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return critical_load(self.E_s, self.I_s, self.L_ref, self.K_b)

    @property
    def inv_mass(self) -> np.ndarray:
        return np.where(self.pinned, 0.0, 1.0 / self.node_m)

    def copy(self) -> "BarNetwork":
        return BarNetwork(**{k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()})


def empty_network() -> BarNetwork:
    z3 = np.zeros((0, 3))
    z = np.zeros(0)
    zi = np.zeros(0, dtype=np.int64)
    return BarNetwork(z3, z3.copy(), z.copy(), z.copy(), np.zeros(0, dtype=bool), zi, zi.copy(), z.copy(),
                      z.copy(), z.copy(), z.copy(), zi.copy(), z.copy(), z.copy(), z.copy(), z.copy(), z.copy(),
                      z.copy(), z.copy(), zi.copy(), z.copy(), z.copy(), z.copy(), z.copy(), z.copy(), z.copy())


def critical_load(E, I, L, K_b=1.0):
    """Euler load ``pi^2 E I / (K_b L)^2``."""
    return np.pi ** 2 * np.asarray(E) * np.asarray(I) / (np.asarray(K_b) * np.asarray(L)) ** 2


def weak_axis_inertia(b: float, h: float) -> float:
    """Second moment of a b x h rectangle about its weak axis."""
    return max(b, h) * min(b, h) ** 3 / 12.0


def bar_fractions(net: BarNetwork, mass_floor: float = 1e-9):
    """Interpolated mass fraction per bar (designable bars use gamma, others are full)."""
    frac = np.ones(net.n_bars)
    bone = net.role == BONE
    frac[bone] = mass_floor + (1.0 - mass_floor) * bone_interpolation(net.gamma[bone])
    return frac


def assemble_node_masses(net: BarNetwork, eps: float = 0.1, p: float = 6.0, mass_floor: float = 1e-9,
                         kappa_floor: float = 1e-9) -> BarNetwork:
    """Half of each bar's (interpolated) mass goes to each endpoint, plus fixed masses.

    Also refreshes bone stiffness ``kappa = kappa_min + (kappa_max - kappa_min) f(gamma)``.
    Axial actuator bars carry no distributed mass; their endpoint masses are fixed.
    """
    bone = net.role == BONE
    f = bone_interpolation(net.gamma[bone], eps, p)
    frac = np.ones(net.n_bars)
    frac[bone] = mass_floor + (1.0 - mass_floor) * f
    bar_mass = frac * net.rho * net.area * net.L_ref
    bar_mass[net.role == ACT_AXIAL] = 0.0
    m = net.fixed_mass.copy()
    np.add.at(m, net.bar_a, 0.5 * bar_mass)
    np.add.at(m, net.bar_b, 0.5 * bar_mass)
    if len(m):
        floor = mass_floor * m.max()
        low = m < floor
        if np.any(low):
            log.warning("%d node(s) below the mass floor were raised to %.3e kg", int(low.sum()), floor)
        m = np.maximum(m, floor)
    net.node_m = m
    kmax = net.kappa_max
    kmin = np.where(bone, kappa_floor * kmax.max(initial=0.0) if np.any(bone) else 0.0, net.kappa_min)
    net.kappa_min = kmin
    net.kappa = net.kappa_max.copy()
    net.kappa[bone] = kmin[bone] + (kmax[bone] - kmin[bone]) * f
    return net


def node_mass_pullback(net: BarNetwork, m_bar, kappa_bar, eps=0.1, p=6.0, mass_floor=1e-9):
    """Gradient of bone gammas given dL/d(node mass) and dL/d(bar kappa)."""
    bone = net.role == BONE
    raw = net.fixed_mass.copy()
    frac = np.ones(net.n_bars)
    frac[bone] = mass_floor + (1.0 - mass_floor) * bone_interpolation(net.gamma[bone], eps, p)
    bar_mass = frac * net.rho * net.area * net.L_ref
    bar_mass[net.role == ACT_AXIAL] = 0.0
    np.add.at(raw, net.bar_a, 0.5 * bar_mass)
    np.add.at(raw, net.bar_b, 0.5 * bar_mass)
    live = raw >= (mass_floor * raw.max() if len(raw) else 0.0)
    mb = np.where(live, m_bar, 0.0)
    df = bone_interpolation_grad(net.gamma[bone], eps, p)
    g_mass = 0.5 * (mb[net.bar_a] + mb[net.bar_b])[bone] * net.rho[bone] * net.area[bone] * net.L_ref[bone] \
        * (1.0 - mass_floor) * df
    g_kappa = kappa_bar[bone] * (net.kappa_max[bone] - net.kappa_min[bone]) * df
    return g_mass + g_kappa


def predict_positions(x, v, m, f_ext, gravity, dt, pinned=None):
    """Explicit prediction ``v' = v + dt (g + f/m)``, ``x' = x + dt v'``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    m = np.asarray(m, dtype=float)
    acc = np.asarray(gravity, dtype=float) + np.asarray(f_ext, dtype=float) / m[:, None]
    v_new = v + dt * acc
    if pinned is not None:
        v_new[pinned] = 0.0
    return x + dt * v_new, v_new


def effective_stiffness_buckling(kappa, kappa_min, L_ref, length, pcr):
    """Cap compressive stiffness so the implied axial force never exceeds the Euler load."""
    if length < L_ref:
        p_est = kappa / L_ref * (L_ref - length)
        if p_est >= pcr:
            return max(kappa_min, min(kappa, pcr * L_ref / (L_ref - length)))
    return kappa


def project_distance_constraint(xa, xb, ma, mb, L_ref, kappa, dt, Lambda=0.0):
    """Single XPBD distance projection; returns ``(xa', xb', Lambda', dLambda)``.

    Infinite masses pin the endpoint. Coincident endpoints are left untouched.
    """
    xa = np.array(xa, dtype=float)
    xb = np.array(xb, dtype=float)
    d = xa - xb
    ell = float(np.linalg.norm(d))
    if ell == 0.0:
        log.warning("coincident bar endpoints; projection skipped")
        return xa, xb, Lambda, 0.0
    n = d / ell
    wa = 0.0 if np.isinf(ma) else 1.0 / ma
    wb = 0.0 if np.isinf(mb) else 1.0 / mb
    g = ell - L_ref
    alpha = L_ref / (kappa * dt * dt) if np.isfinite(kappa) else 0.0
    dlam = (-g - alpha * Lambda) / (wa + wb + alpha)
    return xa + wa * dlam * n, xb - wb * dlam * n, Lambda + dlam, dlam


# ---------------------------------------------------------------------------
# numba kernels for a full substep


@njit(cache=True, inline="always")
def _bar_params(s, ell, role, act_unit, L_ref, kappa, kappa_min, pcr, u_L0, u_dL, u_kfree, u_kact):
    """Return (kappa_eff, L, dkappa/dell, dkappa/dkappa)."""
    if role[s] == 1:
        u = act_unit[s]
        lc = u_L0[u] - u_dL[u]
        if ell <= lc:
            return u_kact[u], lc, 0.0, 0.0
        return u_kfree[u], u_L0[u], 0.0, 0.0
    L = L_ref[s]
    k = kappa[s]
    if ell < L and k / L * (L - ell) >= pcr[s]:
        cap = pcr[s] * L / (L - ell)
        if cap < k:
            if cap < kappa_min[s]:
                return kappa_min[s], L, 0.0, 0.0
            return cap, L, pcr[s] * L / ((L - ell) * (L - ell)), 0.0
        if k < kappa_min[s]:
            return kappa_min[s], L, 0.0, 0.0
        return k, L, 0.0, 1.0
    return k, L, 0.0, 1.0


@njit(cache=True, inline="always")
def _eta_stroke(ell, L0, dL, Lc):
    lc = L0 - dL
    if ell <= lc:
        return 1.0, 0.0
    if ell >= lc + Lc:
        return 0.0, 0.0
    return 1.0 - (ell - lc) / Lc, -1.0 / Lc


@njit(cache=True)
def _actuator_forces(x, bar_a, bar_b, role, act_unit, u_L0, u_dL, u_Lc, u_Fs, V, f):
    for s in range(bar_a.shape[0]):
        if role[s] != 1:
            continue
        u = act_unit[s]
        if V[u] == 0.0:
            continue
        a = bar_a[s]
        b = bar_b[s]
        d0 = x[a, 0] - x[b, 0]
        d1 = x[a, 1] - x[b, 1]
        d2 = x[a, 2] - x[b, 2]
        ell = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if ell == 0.0:
            continue
        eta, _ = _eta_stroke(ell, u_L0[u], u_dL[u], u_Lc[u])
        F = u_Fs[u] * V[u] * eta
        f[a, 0] -= F * d0 / ell
        f[a, 1] -= F * d1 / ell
        f[a, 2] -= F * d2 / ell
        f[b, 0] += F * d0 / ell
        f[b, 1] += F * d1 / ell
        f[b, 2] += F * d2 / ell


@njit(cache=True)
def _xpbd_substep(xn, vn, inv_m, pinned, bar_a, bar_b, role, act_unit, L_ref, kappa, kappa_min, pcr,
                  u_L0, u_dL, u_Lc, u_Fs, u_kfree, u_kact, V, gravity, dt, xpos, vstar, pre, dlam, f):
    """Forces, prediction, one Gauss-Seidel projection sweep in bar order. Returns skipped-bar count."""
    N = xn.shape[0]
    for i in range(N):
        f[i, 0] = 0.0
        f[i, 1] = 0.0
        f[i, 2] = 0.0
    _actuator_forces(xn, bar_a, bar_b, role, act_unit, u_L0, u_dL, u_Lc, u_Fs, V, f)
    for i in range(N):
        for c in range(3):
            if pinned[i]:
                xpos[i, c] = xn[i, c]
            else:
                vp = vn[i, c] + dt * (gravity[c] + f[i, c] * inv_m[i])
                xpos[i, c] = xn[i, c] + dt * vp
    skipped = 0
    for s in range(bar_a.shape[0]):
        a = bar_a[s]
        b = bar_b[s]
        for c in range(3):
            pre[s, 0, c] = xpos[a, c]
            pre[s, 1, c] = xpos[b, c]
        d0 = xpos[a, 0] - xpos[b, 0]
        d1 = xpos[a, 1] - xpos[b, 1]
        d2 = xpos[a, 2] - xpos[b, 2]
        ell = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if ell == 0.0:
            skipped += 1
            dlam[s] = 0.0
            continue
        ke, L, _, _ = _bar_params(s, ell, role, act_unit, L_ref, kappa, kappa_min, pcr, u_L0, u_dL, u_kfree, u_kact)
        alpha = L / (ke * dt * dt)
        wa = inv_m[a]
        wb = inv_m[b]
        den = wa + wb + alpha
        if den == 0.0:
            dlam[s] = 0.0
            continue
        dl = -(ell - L) / den
        dlam[s] = dl
        xpos[a, 0] += wa * dl * d0 / ell
        xpos[a, 1] += wa * dl * d1 / ell
        xpos[a, 2] += wa * dl * d2 / ell
        xpos[b, 0] -= wb * dl * d0 / ell
        xpos[b, 1] -= wb * dl * d1 / ell
        xpos[b, 2] -= wb * dl * d2 / ell
    for i in range(N):
        for c in range(3):
            vstar[i, c] = (xpos[i, c] - xn[i, c]) / dt
    return skipped


@njit(cache=True)
def _xpbd_substep_adjoint(xn, vn, inv_m, pinned, bar_a, bar_b, role, act_unit, L_ref, kappa, kappa_min, pcr,
                          u_L0, u_dL, u_Lc, u_Fs, u_kfree, u_kact, V, gravity, dt, pre, f,
                          vstar_bar, xn_bar, vn_bar, invm_bar, kappa_bar, V_bar):
    """Adjoint of ``_xpbd_substep`` given dL/dvstar. ``f`` must hold the forward actuator forces."""
    N = xn.shape[0]
    xb = np.empty((N, 3))
    for i in range(N):
        for c in range(3):
            xb[i, c] = vstar_bar[i, c] / dt
            xn_bar[i, c] -= vstar_bar[i, c] / dt
    for s in range(bar_a.shape[0] - 1, -1, -1):
        a = bar_a[s]
        b = bar_b[s]
        d0 = pre[s, 0, 0] - pre[s, 1, 0]
        d1 = pre[s, 0, 1] - pre[s, 1, 1]
        d2 = pre[s, 0, 2] - pre[s, 1, 2]
        ell = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if ell == 0.0:
            continue
        ke, L, dk_dl, dk_dk = _bar_params(s, ell, role, act_unit, L_ref, kappa, kappa_min, pcr,
                                          u_L0, u_dL, u_kfree, u_kact)
        alpha = L / (ke * dt * dt)
        wa = inv_m[a]
        wb = inv_m[b]
        den = wa + wb + alpha
        if den == 0.0:
            continue
        g = ell - L
        dl = -g / den
        n0 = d0 / ell
        n1 = d1 / ell
        n2 = d2 / ell
        # post: xa' = xa + wa dl n ; xb' = xb - wb dl n
        cb0 = wa * xb[a, 0] - wb * xb[b, 0]
        cb1 = wa * xb[a, 1] - wb * xb[b, 1]
        cb2 = wa * xb[a, 2] - wb * xb[b, 2]
        wab = dl * (n0 * xb[a, 0] + n1 * xb[a, 1] + n2 * xb[a, 2])
        wbb = -dl * (n0 * xb[b, 0] + n1 * xb[b, 1] + n2 * xb[b, 2])
        dlb = cb0 * n0 + cb1 * n1 + cb2 * n2
        nb0 = dl * cb0
        nb1 = dl * cb1
        nb2 = dl * cb2
        gb = -dlb / den
        denb = -dlb * dl / den
        wab += denb
        wbb += denb
        alphab = denb
        keb = -alphab * alpha / ke
        ellb = gb + keb * dk_dl
        kappa_bar[s] += keb * dk_dk
        invm_bar[a] += wab
        invm_bar[b] += wbb
        ndot = n0 * nb0 + n1 * nb1 + n2 * nb2
        db0 = (nb0 - ndot * n0) / ell + ellb * n0
        db1 = (nb1 - ndot * n1) / ell + ellb * n1
        db2 = (nb2 - ndot * n2) / ell + ellb * n2
        xb[a, 0] += db0
        xb[a, 1] += db1
        xb[a, 2] += db2
        xb[b, 0] -= db0
        xb[b, 1] -= db1
        xb[b, 2] -= db2
    # prediction
    fb = np.zeros((N, 3))
    for i in range(N):
        for c in range(3):
            if pinned[i]:
                xn_bar[i, c] += xb[i, c]
            else:
                xn_bar[i, c] += xb[i, c]
                vpb = dt * xb[i, c]
                vn_bar[i, c] += vpb
                fb[i, c] += dt * vpb * inv_m[i]
                invm_bar[i] += dt * vpb * f[i, c]
    # actuator forces
    for s in range(bar_a.shape[0]):
        if role[s] != 1:
            continue
        u = act_unit[s]
        a = bar_a[s]
        b = bar_b[s]
        d0 = xn[a, 0] - xn[b, 0]
        d1 = xn[a, 1] - xn[b, 1]
        d2 = xn[a, 2] - xn[b, 2]
        ell = np.sqrt(d0 * d0 + d1 * d1 + d2 * d2)
        if ell == 0.0:
            continue
        n0 = d0 / ell
        n1 = d1 / ell
        n2 = d2 / ell
        eta, deta = _eta_stroke(ell, u_L0[u], u_dL[u], u_Lc[u])
        F = u_Fs[u] * V[u] * eta
        # f_a = -F n, f_b = F n
        ub0 = -fb[a, 0] + fb[b, 0]
        ub1 = -fb[a, 1] + fb[b, 1]
        ub2 = -fb[a, 2] + fb[b, 2]
        Fb = n0 * ub0 + n1 * ub1 + n2 * ub2
        V_bar[u] += u_Fs[u] * eta * Fb
        ellb = u_Fs[u] * V[u] * deta * Fb
        nb0 = F * ub0
        nb1 = F * ub1
        nb2 = F * ub2
        ndot = n0 * nb0 + n1 * nb1 + n2 * nb2
        db0 = (nb0 - ndot * n0) / ell + ellb * n0
        db1 = (nb1 - ndot * n1) / ell + ellb * n1
        db2 = (nb2 - ndot * n2) / ell + ellb * n2
        xn_bar[a, 0] += db0
        xn_bar[a, 1] += db1
        xn_bar[a, 2] += db2
        xn_bar[b, 0] -= db0
        xn_bar[b, 1] -= db1
        xn_bar[b, 2] -= db2


def substep(net: BarNetwork, V, gravity, dt, x=None, v=None):
    """Run prediction + one projection sweep on ``net``; returns ``(x_proj, v_star)``."""
    x = net.node_x if x is None else x
    v = net.node_v if v is None else v
    N, nb = net.n_nodes, net.n_bars
    xpos = np.empty((N, 3))
    vstar = np.empty((N, 3))
    pre = np.empty((nb, 2, 3))
    f = np.empty((N, 3))
    skipped = _xpbd_substep(x, v, net.inv_mass, net.pinned, net.bar_a, net.bar_b, net.role, net.act_unit,
                            net.L_ref, net.kappa, net.kappa_min, net.pcr, net.unit_L0, net.unit_dL,
                            net.unit_Lcore, net.unit_Fscale, net.unit_kfree, net.unit_kact,
                            np.asarray(V, dtype=float), np.asarray(gravity, dtype=float), dt,
                            xpos, vstar, pre, net.Lambda, f)
    if skipped:
        log.warning("%d bar(s) with coincident endpoints skipped", skipped)
    return xpos, vstar
