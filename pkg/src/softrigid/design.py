"""Design-variable maps: density filter, smooth projection, SIMP and bone interpolation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree


@dataclass
class DesignVariables:
    phi: np.ndarray     # per particle, [-1, 1]
    gamma: np.ndarray   # per designable bone bar, [0, 1]
    w: np.ndarray       # (actuators, pulses), [0, 1]

    def copy(self) -> "DesignVariables":
        return DesignVariables(self.phi.copy(), self.gamma.copy(), self.w.copy())

    def clamp(self) -> "DesignVariables":
        np.clip(self.phi, -1.0, 1.0, out=self.phi)
        np.clip(self.gamma, 0.0, 1.0, out=self.gamma)
        np.clip(self.w, 0.0, 1.0, out=self.w)
        return self

    def flat(self) -> np.ndarray:
        return np.concatenate([self.phi.ravel(), self.gamma.ravel(), self.w.ravel()])

    def sizes(self) -> tuple[int, int, int]:
        return self.phi.size, self.gamma.size, self.w.size

    def with_flat(self, vec) -> "DesignVariables":
        a, b, _ = self.sizes()
        vec = np.asarray(vec, dtype=float)
        return DesignVariables(vec[:a].copy(), vec[a:a + b].copy(), vec[a + b:].reshape(self.w.shape).copy())


def filter_matrix(rest_positions, radius: float, exponent: float = 3.0) -> sp.csr_matrix:
    """Row-normalized sparse filter ``H`` with weights ``max(0, 1 - r/R)**exponent``.

    Neighborhoods come from rest positions, so the filter acts in material space.
    """
    pts = np.asarray(rest_positions, dtype=float)
    n = len(pts)
    if n == 0:
        return sp.csr_matrix((0, 0))
    tree = cKDTree(pts)
    pairs = tree.query_pairs(radius, output_type="ndarray")
    r = np.linalg.norm(pts[pairs[:, 0]] - pts[pairs[:, 1]], axis=1) if len(pairs) else np.zeros(0)
    w = np.maximum(0.0, 1.0 - r / radius) ** exponent
    rows = np.concatenate([np.arange(n), pairs[:, 0], pairs[:, 1]])
    cols = np.concatenate([np.arange(n), pairs[:, 1], pairs[:, 0]])
    vals = np.concatenate([np.ones(n), w, w])
    H = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    rowsum = np.asarray(H.sum(axis=1)).ravel()
    if np.any(rowsum <= 0):
        raise ValueError("empty filter neighborhood")
    return sp.diags(1.0 / rowsum) @ H


def filter_density(phi, H) -> np.ndarray:
    return H @ np.asarray(phi, dtype=float)


def project_density(phi_bar, beta: float = 8.0) -> np.ndarray:
    """Smooth Heaviside from [-1, 1] onto [0, 1] with threshold at 0."""
    phi_bar = np.asarray(phi_bar, dtype=float)
    tb = np.tanh(beta)
    t = np.clip(np.tanh(beta * phi_bar), -tb, tb)   # libm tanh can overshoot tanh(beta) by an ulp
    return (tb + t) / (2.0 * tb)


def project_density_grad(phi_bar, beta: float = 8.0) -> np.ndarray:
    t = np.tanh(beta * np.asarray(phi_bar, dtype=float))
    return 0.5 * beta * (1.0 - t * t) / np.tanh(beta)


def simp_value(phi_hat, maximum: float, floor_ratio: float = 1e-6, p: float = 3.0):
    floor = floor_ratio * maximum
    return floor + (maximum - floor) * np.asarray(phi_hat, dtype=float) ** p


def simp_soft(phi_hat, material):
    """Cubic SIMP for density, both Lame parameters and the viscosity.

    Returns ``(rho, mu, lam, eta)`` arrays. Viscosity follows the same law so the
    viscous time-step limit does not collapse in near-void regions.
    """
    r = material.floor_ratio
    return (simp_value(phi_hat, material.rho, r), simp_value(phi_hat, material.mu, r),
            simp_value(phi_hat, material.lam, r), simp_value(phi_hat, material.eta, r))


def simp_slope(phi_hat, maximum: float, floor_ratio: float = 1e-6, p: float = 3.0):
    return (1.0 - floor_ratio) * maximum * p * np.asarray(phi_hat, dtype=float) ** (p - 1)


def bone_interpolation(gamma, eps: float = 0.1, p: float = 6.0):
    """Interpolation with nonvanishing slope at zero; returns values in [0, 1]."""
    g = np.asarray(gamma, dtype=float)
    den = (1.0 + eps) ** p - eps ** p
    return ((g + eps) ** p - eps ** p) / den


def bone_interpolation_grad(gamma, eps: float = 0.1, p: float = 6.0):
    g = np.asarray(gamma, dtype=float)
    den = (1.0 + eps) ** p - eps ** p
    return p * (g + eps) ** (p - 1) / den


def symmetrize(values, mirror) -> np.ndarray:
    """Average each entry with its mirror partner (projection onto symmetric fields)."""
    values = np.asarray(values, dtype=float)
    if mirror is None or len(values) == 0:
        return values.copy()
    return 0.5 * (values + values[mirror])


def enforce_symmetry(values, mirror) -> np.ndarray:
    """Copy the lower-index member of each pair onto its partner (exact equality)."""
    values = np.asarray(values, dtype=float).copy()
    if mirror is None or len(values) == 0:
        return values
    idx = np.arange(len(values))
    rep = np.minimum(idx, mirror)
    return values[rep]
