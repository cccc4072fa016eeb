"""Locomotion objective, deviation measures, binarization constraints and the augmented Lagrangian."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CONSTRAINTS = ("soft", "bone", "act", "Nbone")


@dataclass
class ObjectiveReport:
    L_x: float
    D_soft: float
    D_bone: float
    C: dict
    lam: dict
    sigma: dict
    active: dict
    L_total: float
    locomotion_term: float = 0.0
    penalty_terms: dict = field(default_factory=dict)

    @property
    def C_soft(self):
        return self.C["soft"]

    @property
    def C_bone(self):
        return self.C["bone"]

    @property
    def C_act(self):
        return self.C["act"]

    @property
    def C_Nbone(self):
        return self.C["Nbone"]


def center_of_mass(xp, mp, xn=None, mn=None):
    xp = np.asarray(xp, dtype=float).reshape(-1, 3)
    mp = np.asarray(mp, dtype=float)
    tot = mp @ xp if len(mp) else np.zeros(3)
    M = mp.sum()
    if xn is not None and len(mn):
        tot = tot + np.asarray(mn) @ np.asarray(xn).reshape(-1, 3)
        M += np.sum(mn)
    return tot / M


def locomotion_distance(cg_start, cg_end, e_x=(1.0, 0.0, 0.0)) -> float:
    """Forward displacement of the center of mass."""
    return float((np.asarray(cg_end) - np.asarray(cg_start)) @ np.asarray(e_x, dtype=float))


def locomotion_distance_from_trajectory(traj, t_start: float, t_end: float) -> float:
    return locomotion_distance(traj.cg_at(t_start), traj.cg_at(t_end))


def _residuals(x0, xe, dcg):
    d = np.asarray(xe, dtype=float) - np.asarray(x0, dtype=float)
    d[:, 0] -= dcg
    return d


def _mean_norm(d, m):
    if len(m) == 0 or np.sum(m) <= 0:
        return 0.0, np.zeros(len(m))
    nrm = np.sqrt(np.einsum("ij,ij->i", d, d))
    return float(m @ nrm / m.sum()), nrm


def deviation_penalties(xp0, xpe, mp, xn0, xne, mn):
    """Mass-weighted mean residual norms ``(D_soft, D_bone)`` relative to rigid x-translation."""
    xp0 = np.asarray(xp0, dtype=float).reshape(-1, 3)
    xpe = np.asarray(xpe, dtype=float).reshape(-1, 3)
    xn0 = np.asarray(xn0, dtype=float).reshape(-1, 3)
    xne = np.asarray(xne, dtype=float).reshape(-1, 3)
    mp = np.asarray(mp, dtype=float)
    mn = np.asarray(mn, dtype=float)
    dcg = center_of_mass(xpe, mp, xne, mn)[0] - center_of_mass(xp0, mp, xn0, mn)[0]
    Ds, _ = _mean_norm(_residuals(xp0, xpe, dcg), mp)
    Db, _ = _mean_norm(_residuals(xn0, xne, dcg), mn)
    return Ds, Db


def binarization_constraints(phi_hat, gamma, w, bounds: dict, n_designable: int | None = None, max_bones=40):
    """``(C_soft, C_bone, C_act, C_Nbone)``; positive means violated.

    ``bounds`` holds ``soft``, ``act`` and ``bone_total``; the bone bound is
    divided by the designable bar count.
    """
    phi_hat = np.asarray(phi_hat, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    w = np.asarray(w, dtype=float).ravel()
    nd = len(gamma) if n_designable is None else n_designable
    C_soft = float(np.mean(phi_hat * (1 - phi_hat)) - bounds["soft"]) if phi_hat.size else 0.0
    C_act = float(np.mean(w * (1 - w)) - bounds["act"]) if w.size else 0.0
    if nd:
        C_bone = float(np.mean(gamma * (1 - gamma)) - bounds["bone_total"] / nd)
        C_Nbone = float(np.mean(gamma) - max_bones / nd)
    else:
        C_bone = C_Nbone = 0.0
    return C_soft, C_bone, C_act, C_Nbone


def constraint_grads(phi_hat, gamma, w):
    """Gradients of the four constraint averages w.r.t. their own variables."""
    phi_hat = np.asarray(phi_hat, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    w = np.asarray(w, dtype=float)
    g_soft = (1 - 2 * phi_hat) / max(phi_hat.size, 1)
    g_act = (1 - 2 * w) / max(w.size, 1)
    g_bone = (1 - 2 * gamma) / max(gamma.size, 1)
    g_nbone = np.full_like(gamma, 1.0 / max(gamma.size, 1))
    return g_soft, g_bone, g_act, g_nbone


def al_term(C, lam, sigma):
    """Inequality augmented-Lagrangian term and its slope in ``C`` (``lam <= 0`` convention).

    Equals ``-lam C + sigma C^2 / 2`` whenever ``C >= lam / sigma``, in particular
    for every violated constraint; below that point it is flat.
    """
    if C >= lam / sigma:
        return -lam * C + 0.5 * sigma * C * C, -lam + sigma * C
    return -lam * lam / (2.0 * sigma), 0.0


def augmented_lagrangian(L_x, D_soft, D_bone, C: dict, lam: dict, sigma: dict, active: dict,
                         D_bar_soft=0.005, D_bar_bone=0.005):
    """Total loss and its partial derivatives in ``(L_x, D_soft, D_bone, C_i)``."""
    a_s = D_bar_soft / (D_bar_soft + D_soft)
    a_b = D_bar_bone / (D_bar_bone + D_bone)
    loco = -L_x * a_s * a_b
    total = loco
    dC = {}
    terms = {}
    for k in CONSTRAINTS:
        if active.get(k, True):
            v, g = al_term(C[k], lam[k], sigma[k])
        else:
            v, g = 0.0, 0.0
        terms[k] = v
        dC[k] = g
        total += v
    d = dict(L_x=-a_s * a_b,
             D_soft=L_x * a_b * D_bar_soft / (D_bar_soft + D_soft) ** 2,
             D_bone=L_x * a_s * D_bar_bone / (D_bar_bone + D_bone) ** 2,
             C=dC)
    return total, loco, terms, d


@dataclass
class ObjectiveSeeds:
    """Adjoint seeds produced by the objective for the backward pass."""

    state_x: dict          # step -> (particle x_bar, node x_bar)
    mass: np.ndarray       # dL/d(particle mass), direct
    node_m: np.ndarray     # dL/d(node mass), direct
    phi_hat: np.ndarray
    gamma: np.ndarray
    w: np.ndarray


def evaluate(x0, n0, xs, ns, xe, ne, mp, mn, phi_hat, gamma, w, opt, lam, sigma, active,
             n_designable=None, steps=(0, 0, 0)):
    """Full objective with seeds.

    ``x0/n0``, ``xs/ns``, ``xe/ne`` are particle/node positions at t=0, t_start
    and t_end; ``steps`` gives the matching step indices. ``opt`` is an
    :class:`~softrigid.scene.OptimizerConfig`.
    """
    mp = np.asarray(mp, dtype=float)
    mn = np.asarray(mn, dtype=float)
    M = mp.sum() + mn.sum()
    cg0 = center_of_mass(x0, mp, n0, mn)
    cgs = center_of_mass(xs, mp, ns, mn)
    cge = center_of_mass(xe, mp, ne, mn)
    L_x = float(cge[0] - cgs[0])
    dcg = cge[0] - cg0[0]
    dp = _residuals(x0, xe, dcg)
    dn = _residuals(n0, ne, dcg)
    Ds, nrm_p = _mean_norm(dp, mp)
    Db, nrm_n = _mean_norm(dn, mn)
    nd = len(gamma) if n_designable is None else n_designable
    bounds = dict(soft=opt.C_soft_bound, act=opt.C_act_bound, bone_total=opt.C_bone_bound_total)
    Cs = binarization_constraints(phi_hat, gamma, w, bounds, nd, opt.max_bones)
    C = dict(zip(CONSTRAINTS, Cs))
    total, loco, terms, d = augmented_lagrangian(L_x, Ds, Db, C, lam, sigma, active, opt.D_bar_soft_m,
                                                 opt.D_bar_bone_m)
    report = ObjectiveReport(L_x, Ds, Db, C, dict(lam), dict(sigma), dict(active), total, loco, terms)

    # --- seeds -------------------------------------------------------------
    def unit(dv, nrm):
        u = np.zeros_like(dv)
        nz = nrm > 0
        u[nz] = dv[nz] / nrm[nz, None]
        return u

    up, un = unit(dp, nrm_p), unit(dn, nrm_n)
    Mp, Mn = mp.sum(), mn.sum()
    gDs, gDb = d["D_soft"], d["D_bone"]
    # residual gradients w.r.t. end positions (direct) and the cg_x shift
    gxe_p = (gDs / Mp) * mp[:, None] * up if Mp > 0 else np.zeros_like(dp)
    gxe_n = (gDb / Mn) * mn[:, None] * un if Mn > 0 else np.zeros_like(dn)
    g_dcg = -(gxe_p[:, 0].sum() + gxe_n[:, 0].sum())
    g_cge = d["L_x"] + g_dcg
    g_cgs = -d["L_x"]
    g_cg0 = -g_dcg
    seeds_x = {}

    def add(step, gp, gn):
        if step in seeds_x:
            seeds_x[step][0][...] += gp
            seeds_x[step][1][...] += gn
        else:
            seeds_x[step] = (gp.copy(), gn.copy())

    n0_step, ns_step, ne_step = steps
    for step, g_cg, extra_p, extra_n in ((ne_step, g_cge, gxe_p, gxe_n), (ns_step, g_cgs, 0.0, 0.0)):
        gp = np.zeros((len(mp), 3)) + extra_p
        gn = np.zeros((len(mn), 3)) + extra_n
        gp[:, 0] += g_cg * mp / M
        gn[:, 0] += g_cg * mn / M
        add(step, gp, gn)
    # t = 0 positions are the rest configuration: no state seed, only mass terms below.
    xp_arr = [np.asarray(a).reshape(-1, 3) for a in (x0, xs, xe)]
    xn_arr = [np.asarray(a).reshape(-1, 3) for a in (n0, ns, ne)]
    cgx = (cg0[0], cgs[0], cge[0])
    g_mass = np.zeros(len(mp))
    g_nm = np.zeros(len(mn))
    for k, g_cg in ((0, g_cg0), (1, g_cgs), (2, g_cge)):
        g_mass += g_cg * (xp_arr[k][:, 0] - cgx[k]) / M
        g_nm += g_cg * (xn_arr[k][:, 0] - cgx[k]) / M
    if Mp > 0:
        g_mass += gDs * (nrm_p - Ds) / Mp
    if Mn > 0:
        g_nm += gDb * (nrm_n - Db) / Mn
    gs_soft, gs_bone, gs_act, gs_nbone = constraint_grads(phi_hat, gamma, w)
    g_phi_hat = d["C"]["soft"] * gs_soft
    g_gamma = d["C"]["bone"] * gs_bone + d["C"]["Nbone"] * gs_nbone
    g_w = d["C"]["act"] * gs_act
    return report, ObjectiveSeeds(seeds_x, g_mass, g_nm, g_phi_hat, g_gamma, g_w)
