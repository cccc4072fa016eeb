"""MLS-MPM kernels for the soft continuum.

Forward kernels and their hand-written adjoints live side by side so the two
stay in sync. All kernels are sequential numba loops: accumulation order into
the grid is fixed, which makes every run bit-reproducible.

Grid layout: node ``(i, j, k)`` sits at ``(i, j, k) * dx``; scalar fields have
shape ``(nx, ny, nz)`` and vector fields ``(nx, ny, nz, 3)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .errors import InversionError, SafeBandError

# Kernel status codes.
OK = 0
OUT_OF_BAND = 1
INVERTED = 2


@dataclass
class SoftMaterial:
    """Full-density soft material; per-particle values come from SIMP."""

    E: float = 0.144e6
    nu: float = 0.4
    rho: float = 1070.0
    eta: float = 5.0
    floor_ratio: float = 1e-6

    @property
    def mu(self) -> float:
        return self.E / (2.0 * (1.0 + self.nu))

    @property
    def lam(self) -> float:
        return self.E * self.nu / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))


@dataclass
class ParticleState:
    x: np.ndarray
    v: np.ndarray
    C: np.ndarray
    F: np.ndarray
    volume0: float
    phi: np.ndarray
    phi_hat: np.ndarray
    mass: np.ndarray
    mu: np.ndarray
    lam: np.ndarray
    eta: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def copy(self) -> "ParticleState":
        return ParticleState(
            self.x.copy(), self.v.copy(), self.C.copy(), self.F.copy(), self.volume0,
            self.phi.copy(), self.phi_hat.copy(), self.mass.copy(),
            self.mu.copy(), self.lam.copy(), self.eta.copy(),
        )


@dataclass
class GridField:
    shape: tuple
    dx: float
    mass: np.ndarray = field(init=False)
    momentum: np.ndarray = field(init=False)
    velocity: np.ndarray = field(init=False)

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        self.mass = np.zeros(self.shape)
        self.momentum = np.zeros(self.shape + (3,))
        self.velocity = np.zeros(self.shape + (3,))

    def clear(self):
        self.mass[:] = 0.0
        self.momentum[:] = 0.0
        self.velocity[:] = 0.0


def empty_particles(volume0: float = 0.0) -> ParticleState:
    z3 = np.zeros((0, 3))
    z33 = np.zeros((0, 3, 3))
    z = np.zeros(0)
    return ParticleState(z3, z3.copy(), z33, z33.copy(), volume0, z, z.copy(), z.copy(), z.copy(), z.copy(), z.copy())


# ---------------------------------------------------------------------------
# shared stencil helpers


@njit(cache=True, inline="always")
def _stencil(xp, inv_dx, shape, w, dw, fx):
    """Fill quadratic B-spline weights/derivatives; return base index or -1 if out of grid."""
    b0 = int(np.floor(xp[0] * inv_dx - 0.5))
    b1 = int(np.floor(xp[1] * inv_dx - 0.5))
    b2 = int(np.floor(xp[2] * inv_dx - 0.5))
    if b0 < 0 or b1 < 0 or b2 < 0 or b0 + 2 >= shape[0] or b1 + 2 >= shape[1] or b2 + 2 >= shape[2]:
        return -1, -1, -1
    fx[0] = xp[0] * inv_dx - b0
    fx[1] = xp[1] * inv_dx - b1
    fx[2] = xp[2] * inv_dx - b2
    for d in range(3):
        f = fx[d]
        w[0, d] = 0.5 * (1.5 - f) ** 2
        w[1, d] = 0.75 - (f - 1.0) ** 2
        w[2, d] = 0.5 * (f - 0.5) ** 2
        dw[0, d] = f - 1.5
        dw[1, d] = -2.0 * (f - 1.0)
        dw[2, d] = f - 0.5
    return b0, b1, b2


@njit(cache=True, inline="always")
def _kirchhoff(F, C, mu, lam, eta, tau):
    """tau = J*sigma for neo-Hookean + viscous stress; returns J."""
    J = (F[0, 0] * (F[1, 1] * F[2, 2] - F[1, 2] * F[2, 1])
         - F[0, 1] * (F[1, 0] * F[2, 2] - F[1, 2] * F[2, 0])
         + F[0, 2] * (F[1, 0] * F[2, 1] - F[1, 1] * F[2, 0]))
    if J <= 0.0:
        return J
    lnJ = np.log(J)
    trC = C[0, 0] + C[1, 1] + C[2, 2]
    for a in range(3):
        for b in range(3):
            ffT = F[a, 0] * F[b, 0] + F[a, 1] * F[b, 1] + F[a, 2] * F[b, 2]
            s = C[a, b] + C[b, a]
            if a == b:
                ffT -= 1.0
                s -= 2.0 / 3.0 * trC
                tau[a, b] = mu * ffT + lam * lnJ + J * eta * s
            else:
                tau[a, b] = mu * ffT + J * eta * s
    return J


@njit(cache=True, inline="always")
def _cofactor(F, out):
    out[0, 0] = F[1, 1] * F[2, 2] - F[1, 2] * F[2, 1]
    out[0, 1] = F[1, 2] * F[2, 0] - F[1, 0] * F[2, 2]
    out[0, 2] = F[1, 0] * F[2, 1] - F[1, 1] * F[2, 0]
    out[1, 0] = F[0, 2] * F[2, 1] - F[0, 1] * F[2, 2]
    out[1, 1] = F[0, 0] * F[2, 2] - F[0, 2] * F[2, 0]
    out[1, 2] = F[0, 1] * F[2, 0] - F[0, 0] * F[2, 1]
    out[2, 0] = F[0, 1] * F[1, 2] - F[0, 2] * F[1, 1]
    out[2, 1] = F[0, 2] * F[1, 0] - F[0, 0] * F[1, 2]
    out[2, 2] = F[0, 0] * F[1, 1] - F[0, 1] * F[1, 0]


# ---------------------------------------------------------------------------
# constitutive model


@njit(cache=True)
def _cauchy_batch(F, C, mu, lam, eta, out):
    tau = np.empty((3, 3))
    for p in range(F.shape[0]):
        J = _kirchhoff(F[p], C[p], mu[p], lam[p], eta[p], tau)
        if J <= 0.0:
            return p
        for a in range(3):
            for b in range(3):
                out[p, a, b] = tau[a, b] / J
    return -1


def compute_stress(F, C, mu, lam, eta=0.0):
    """Cauchy stress of the compressible neo-Hookean solid plus viscous term.

    The velocity gradient of the viscous term is the particle's APIC matrix
    ``C``. Accepts a single 3x3 ``F`` or a batch ``(n, 3, 3)``.
    """
    F = np.asarray(F, dtype=float)
    single = F.ndim == 2
    F = np.ascontiguousarray(F.reshape(-1, 3, 3))
    C = np.ascontiguousarray(np.broadcast_to(np.asarray(C, dtype=float), F.shape))
    n = F.shape[0]
    mu = np.broadcast_to(np.asarray(mu, dtype=float), (n,)).copy()
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (n,)).copy()
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (n,)).copy()
    out = np.empty((n, 3, 3))
    bad = _cauchy_batch(F, C, mu, lam, eta, out)
    if bad >= 0:
        raise InversionError(bad, float(np.linalg.det(F[bad])))
    return out[0] if single else out


# ---------------------------------------------------------------------------
# particle to grid


@njit(cache=True)
def _p2g(x, v, C, F, mass, mu, lam, eta, vol0, dx, dt, gm, gp):
    inv_dx = 1.0 / dx
    k = dt * vol0 * 4.0 * inv_dx * inv_dx
    shape = gm.shape
    w = np.empty((3, 3))
    dw = np.empty((3, 3))
    fx = np.empty(3)
    tau = np.empty((3, 3))
    A = np.empty((3, 3))
    for p in range(x.shape[0]):
        b0, b1, b2 = _stencil(x[p], inv_dx, shape, w, dw, fx)
        if b0 < 0:
            return OUT_OF_BAND, p
        J = _kirchhoff(F[p], C[p], mu[p], lam[p], eta[p], tau)
        if J <= 0.0:
            return INVERTED, p
        m = mass[p]
        for a in range(3):
            for b in range(3):
                A[a, b] = -k * tau[a, b] + m * C[p, a, b]
        for i in range(3):
            d0 = (i - fx[0]) * dx
            for j in range(3):
                d1 = (j - fx[1]) * dx
                wij = w[i, 0] * w[j, 1]
                for l in range(3):
                    d2 = (l - fx[2]) * dx
                    W = wij * w[l, 2]
                    gm[b0 + i, b1 + j, b2 + l] += W * m
                    for a in range(3):
                        q = m * v[p, a] + A[a, 0] * d0 + A[a, 1] * d1 + A[a, 2] * d2
                        gp[b0 + i, b1 + j, b2 + l, a] += W * q
    return OK, -1


@njit(cache=True)
def _p2g_adjoint(x, v, C, F, mass, mu, lam, eta, vol0, dx, dt, gm_bar, gp_bar,
                 x_bar, v_bar, C_bar, F_bar, m_bar, mu_bar, lam_bar, eta_bar):
    inv_dx = 1.0 / dx
    k = dt * vol0 * 4.0 * inv_dx * inv_dx
    shape = gm_bar.shape
    w = np.empty((3, 3))
    dw = np.empty((3, 3))
    fx = np.empty(3)
    tau = np.empty((3, 3))
    A = np.empty((3, 3))
    Ab = np.empty((3, 3))
    cof = np.empty((3, 3))
    dpos = np.empty(3)
    q = np.empty(3)
    for p in range(x.shape[0]):
        b0, b1, b2 = _stencil(x[p], inv_dx, shape, w, dw, fx)
        J = _kirchhoff(F[p], C[p], mu[p], lam[p], eta[p], tau)
        m = mass[p]
        for a in range(3):
            for b in range(3):
                A[a, b] = -k * tau[a, b] + m * C[p, a, b]
                Ab[a, b] = 0.0
        mb = 0.0
        xb0 = 0.0
        xb1 = 0.0
        xb2 = 0.0
        for i in range(3):
            dpos[0] = (i - fx[0]) * dx
            for j in range(3):
                dpos[1] = (j - fx[1]) * dx
                for l in range(3):
                    dpos[2] = (l - fx[2]) * dx
                    W = w[i, 0] * w[j, 1] * w[l, 2]
                    I0 = b0 + i
                    I1 = b1 + j
                    I2 = b2 + l
                    gmb = gm_bar[I0, I1, I2]
                    Wb = gmb * m
                    gpv = 0.0
                    for a in range(3):
                        q[a] = m * v[p, a] + A[a, 0] * dpos[0] + A[a, 1] * dpos[1] + A[a, 2] * dpos[2]
                        g = gp_bar[I0, I1, I2, a]
                        Wb += g * q[a]
                        gpv += g * v[p, a]
                        v_bar[p, a] += W * m * g
                        for b in range(3):
                            Ab[a, b] += W * g * dpos[b]
                    mb += W * (gmb + gpv)
                    # dpos = (o - fx) * dx depends on x with slope -1
                    for b in range(3):
                        s = 0.0
                        for a in range(3):
                            s += A[a, b] * gp_bar[I0, I1, I2, a]
                        if b == 0:
                            xb0 -= W * s
                        elif b == 1:
                            xb1 -= W * s
                        else:
                            xb2 -= W * s
                    xb0 += Wb * inv_dx * dw[i, 0] * w[j, 1] * w[l, 2]
                    xb1 += Wb * inv_dx * w[i, 0] * dw[j, 1] * w[l, 2]
                    xb2 += Wb * inv_dx * w[i, 0] * w[j, 1] * dw[l, 2]
        x_bar[p, 0] += xb0
        x_bar[p, 1] += xb1
        x_bar[p, 2] += xb2
        # A = -k tau + m C
        for a in range(3):
            for b in range(3):
                mb += Ab[a, b] * C[p, a, b]
                C_bar[p, a, b] += m * Ab[a, b]
        m_bar[p] += mb
        # tau adjoint (tau_bar = -k Ab)
        lnJ = np.log(J)
        trC = C[p, 0, 0] + C[p, 1, 1] + C[p, 2, 2]
        tr_tb = -k * (Ab[0, 0] + Ab[1, 1] + Ab[2, 2])
        mu_b = 0.0
        tS = 0.0
        for a in range(3):
            for b in range(3):
                tb = -k * Ab[a, b]
                ffT = F[p, a, 0] * F[p, b, 0] + F[p, a, 1] * F[p, b, 1] + F[p, a, 2] * F[p, b, 2]
                s = C[p, a, b] + C[p, b, a]
                if a == b:
                    ffT -= 1.0
                    s -= 2.0 / 3.0 * trC
                mu_b += tb * ffT
                tS += tb * s
        mu_bar[p] += mu_b
        lam_bar[p] += lnJ * tr_tb
        eta_bar[p] += J * tS
        Jb = lam[p] * tr_tb / J + eta[p] * tS
        _cofactor(F[p], cof)
        for a in range(3):
            for c in range(3):
                acc = 0.0
                for b in range(3):
                    acc += (-k * (Ab[a, b] + Ab[b, a])) * F[p, b, c]
                F_bar[p, a, c] += mu[p] * acc + Jb * cof[a, c]
        # S_bar = J eta tau_bar; C_bar += S_bar + S_bar^T - 2/3 tr(S_bar) I
        je = J * eta[p]
        for a in range(3):
            for b in range(3):
                C_bar[p, a, b] += je * (-k) * (Ab[a, b] + Ab[b, a])
                if a == b:
                    C_bar[p, a, b] -= je * 2.0 / 3.0 * tr_tb


# ---------------------------------------------------------------------------
# grid update


@njit(cache=True)
def _grid_update(gm, gp, gv, gravity, dt, dx, use_floor, floor_height, friction, bound):
    nx, ny, nz = gm.shape
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                m = gm[i, j, k]
                if m <= 0.0:
                    gv[i, j, k, 0] = 0.0
                    gv[i, j, k, 1] = 0.0
                    gv[i, j, k, 2] = 0.0
                    continue
                if (i < bound or i >= nx - bound or j < bound or j >= ny - bound
                        or k >= nz - bound or (k < bound and not use_floor)):
                    gv[i, j, k, 0] = 0.0
                    gv[i, j, k, 1] = 0.0
                    gv[i, j, k, 2] = 0.0
                    continue
                vx = gp[i, j, k, 0] / m + gravity[0] * dt
                vy = gp[i, j, k, 1] / m + gravity[1] * dt
                vz = gp[i, j, k, 2] / m + gravity[2] * dt
                if use_floor and k * dx <= floor_height + 1e-12 and vz < 0.0:
                    t = np.sqrt(vx * vx + vy * vy)
                    if t > 0.0:
                        s = 1.0 + friction * vz / t
                        if s < 0.0:
                            s = 0.0
                        vx *= s
                        vy *= s
                    vz = 0.0
                gv[i, j, k, 0] = vx
                gv[i, j, k, 1] = vy
                gv[i, j, k, 2] = vz


@njit(cache=True)
def _grid_update_adjoint(gm, gp, gv_bar, gravity, dt, dx, use_floor, floor_height, friction, bound,
                         gm_bar, gp_bar):
    nx, ny, nz = gm.shape
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                m = gm[i, j, k]
                if m <= 0.0:
                    continue
                if (i < bound or i >= nx - bound or j < bound or j >= ny - bound
                        or k >= nz - bound or (k < bound and not use_floor)):
                    continue
                vx = gp[i, j, k, 0] / m + gravity[0] * dt
                vy = gp[i, j, k, 1] / m + gravity[1] * dt
                vz = gp[i, j, k, 2] / m + gravity[2] * dt
                bx = gv_bar[i, j, k, 0]
                by = gv_bar[i, j, k, 1]
                bz = gv_bar[i, j, k, 2]
                if use_floor and k * dx <= floor_height + 1e-12 and vz < 0.0:
                    t = np.sqrt(vx * vx + vy * vy)
                    if t > 0.0:
                        s = 1.0 + friction * vz / t
                        if s <= 0.0:
                            bx = 0.0
                            by = 0.0
                            bz = 0.0
                        else:
                            ux = vx / t
                            uy = vy / t
                            c = friction * vz / t
                            # vt_out = vt + mu*vn*u
                            nbx = bx + c * ((1.0 - ux * ux) * bx - ux * uy * by)
                            nby = by + c * (-ux * uy * bx + (1.0 - uy * uy) * by)
                            bz = friction * (ux * bx + uy * by)
                            bx = nbx
                            by = nby
                    else:
                        bz = 0.0
                gp_bar[i, j, k, 0] += bx / m
                gp_bar[i, j, k, 1] += by / m
                gp_bar[i, j, k, 2] += bz / m
                gm_bar[i, j, k] -= (bx * gp[i, j, k, 0] + by * gp[i, j, k, 1] + bz * gp[i, j, k, 2]) / (m * m)


# ---------------------------------------------------------------------------
# grid to particle


@njit(cache=True)
def _g2p(gv, x, F, dx, dt, x_out, v_out, C_out, F_out):
    inv_dx = 1.0 / dx
    shape = gv.shape[:3]
    w = np.empty((3, 3))
    dw = np.empty((3, 3))
    fx = np.empty(3)
    B = np.empty((3, 3))
    nv = np.empty(3)
    scale = 4.0 * inv_dx * inv_dx
    for p in range(x.shape[0]):
        b0, b1, b2 = _stencil(x[p], inv_dx, shape, w, dw, fx)
        if b0 < 0:
            return OUT_OF_BAND, p
        for a in range(3):
            nv[a] = 0.0
            for b in range(3):
                B[a, b] = 0.0
        for i in range(3):
            d0 = (i - fx[0]) * dx
            for j in range(3):
                d1 = (j - fx[1]) * dx
                wij = w[i, 0] * w[j, 1]
                for l in range(3):
                    d2 = (l - fx[2]) * dx
                    W = wij * w[l, 2]
                    for a in range(3):
                        g = gv[b0 + i, b1 + j, b2 + l, a]
                        nv[a] += W * g
                        B[a, 0] += W * g * d0
                        B[a, 1] += W * g * d1
                        B[a, 2] += W * g * d2
        for a in range(3):
            v_out[p, a] = nv[a]
            x_out[p, a] = x[p, a] + dt * nv[a]
            for b in range(3):
                C_out[p, a, b] = scale * B[a, b]
        for a in range(3):
            for c in range(3):
                s = F[p, a, c]
                for b in range(3):
                    s += dt * C_out[p, a, b] * F[p, b, c]
                F_out[p, a, c] = s
        J = (F_out[p, 0, 0] * (F_out[p, 1, 1] * F_out[p, 2, 2] - F_out[p, 1, 2] * F_out[p, 2, 1])
             - F_out[p, 0, 1] * (F_out[p, 1, 0] * F_out[p, 2, 2] - F_out[p, 1, 2] * F_out[p, 2, 0])
             + F_out[p, 0, 2] * (F_out[p, 1, 0] * F_out[p, 2, 1] - F_out[p, 1, 1] * F_out[p, 2, 0]))
        if J <= 0.0:
            return INVERTED, p
    return OK, -1


@njit(cache=True)
def _g2p_adjoint(gv, x, F, dx, dt, x_out_bar, v_out_bar, C_out_bar, F_out_bar, gv_bar, x_bar, F_bar):
    """Adjoint of ``_g2p``. ``x_bar`` and ``F_bar`` receive the old-state adjoints (+=)."""
    inv_dx = 1.0 / dx
    shape = gv.shape[:3]
    w = np.empty((3, 3))
    dw = np.empty((3, 3))
    fx = np.empty(3)
    Cn = np.empty((3, 3))
    Bb = np.empty((3, 3))
    vb = np.empty(3)
    dpos = np.empty(3)
    scale = 4.0 * inv_dx * inv_dx
    for p in range(x.shape[0]):
        b0, b1, b2 = _stencil(x[p], inv_dx, shape, w, dw, fx)
        for a in range(3):
            for b in range(3):
                Cn[a, b] = 0.0
        for i in range(3):
            dpos[0] = (i - fx[0]) * dx
            for j in range(3):
                dpos[1] = (j - fx[1]) * dx
                for l in range(3):
                    dpos[2] = (l - fx[2]) * dx
                    W = w[i, 0] * w[j, 1] * w[l, 2] * scale
                    for a in range(3):
                        g = gv[b0 + i, b1 + j, b2 + l, a]
                        for b in range(3):
                            Cn[a, b] += W * g * dpos[b]
        # F_out = (I + dt Cn) F
        for a in range(3):
            for c in range(3):
                s = F_out_bar[p, a, c]
                for b in range(3):
                    s += dt * Cn[b, a] * F_out_bar[p, b, c]
                F_bar[p, a, c] += s
        for a in range(3):
            vb[a] = v_out_bar[p, a] + dt * x_out_bar[p, a]
            x_bar[p, a] += x_out_bar[p, a]
            for b in range(3):
                s = C_out_bar[p, a, b]
                for c in range(3):
                    s += dt * F_out_bar[p, a, c] * F[p, b, c]
                Bb[a, b] = scale * s
        xb0 = 0.0
        xb1 = 0.0
        xb2 = 0.0
        for i in range(3):
            dpos[0] = (i - fx[0]) * dx
            for j in range(3):
                dpos[1] = (j - fx[1]) * dx
                for l in range(3):
                    dpos[2] = (l - fx[2]) * dx
                    W = w[i, 0] * w[j, 1] * w[l, 2]
                    I0 = b0 + i
                    I1 = b1 + j
                    I2 = b2 + l
                    Wb = 0.0
                    for a in range(3):
                        g = gv[I0, I1, I2, a]
                        Bd = Bb[a, 0] * dpos[0] + Bb[a, 1] * dpos[1] + Bb[a, 2] * dpos[2]
                        gv_bar[I0, I1, I2, a] += W * (vb[a] + Bd)
                        Wb += g * (vb[a] + Bd)
                    for b in range(3):
                        s = 0.0
                        for a in range(3):
                            s += Bb[a, b] * gv[I0, I1, I2, a]
                        if b == 0:
                            xb0 -= W * s
                        elif b == 1:
                            xb1 -= W * s
                        else:
                            xb2 -= W * s
                    xb0 += Wb * inv_dx * dw[i, 0] * w[j, 1] * w[l, 2]
                    xb1 += Wb * inv_dx * w[i, 0] * dw[j, 1] * w[l, 2]
                    xb2 += Wb * inv_dx * w[i, 0] * w[j, 1] * dw[l, 2]
        x_bar[p, 0] += xb0
        x_bar[p, 1] += xb1
        x_bar[p, 2] += xb2


# ---------------------------------------------------------------------------
# public wrappers


def bspline_weights(x, dx):
    """Per-particle 3x3x3 stencil weights and base node indices (for inspection/tests)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    Xp = x / dx
    base = np.floor(Xp - 0.5).astype(int)
    f = Xp - base
    w = np.stack([0.5 * (1.5 - f) ** 2, 0.75 - (f - 1.0) ** 2, 0.5 * (f - 0.5) ** 2], axis=1)
    W = w[:, :, None, None, 0] * w[:, None, :, None, 1] * w[:, None, None, :, 2]
    return base, W


def p2g(particles: ParticleState, grid: GridField, dt: float) -> GridField:
    """Scatter particle mass/momentum (APIC + fused MLS stress) onto a cleared grid."""
    grid.clear()
    if particles.n:
        status, idx = _p2g(particles.x, particles.v, particles.C, particles.F, particles.mass,
                           particles.mu, particles.lam, particles.eta, particles.volume0,
                           grid.dx, dt, grid.mass, grid.momentum)
        _raise_status(status, idx, particles.F)
    return grid


def grid_update(grid: GridField, dt: float, gravity, floor_height=None, friction_mu: float = 0.4,
                bound: int = 3) -> GridField:
    g = np.asarray(gravity, dtype=float)
    use_floor = floor_height is not None
    _grid_update(grid.mass, grid.momentum, grid.velocity, g, dt, grid.dx, use_floor,
                 float(floor_height) if use_floor else 0.0, float(friction_mu), int(bound))
    return grid


def g2p(grid: GridField, particles: ParticleState, dt: float) -> ParticleState:
    out = particles.copy()
    if particles.n:
        status, idx = _g2p(grid.velocity, particles.x, particles.F, grid.dx, dt, out.x, out.v, out.C, out.F)
        _raise_status(status, idx, out.F)
    return out


def _raise_status(status, idx, F):
    if status == OUT_OF_BAND:
        raise SafeBandError(idx)
    if status == INVERTED:
        raise InversionError(idx, float(np.linalg.det(F[idx])))
