"""Solenoid actuator model: pulse-train voltage, stroke attenuation, state-dependent axial stiffness."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ActuatorUnit:
    name: str = "unit"
    axial_bars: tuple = ()
    lateral_bars: tuple = ()
    L0: float = 0.065
    dL: float = 0.015
    L_core: float = 0.030
    F_max: float = 10.0
    kappa_free: float = 0.3
    kappa_act: float = 3.0e8

    def __post_init__(self):
        if not (0.0 < self.dL < self.L0):
            raise ValueError("actuator stroke must satisfy 0 < dL < L0")
        if self.L_core <= 0.0:
            raise ValueError("core length must be positive")

    @property
    def L_contracted(self) -> float:
        return self.L0 - self.dL


@dataclass
class ActuationSignal:
    w: np.ndarray
    pulse_dt: float = 0.002
    pulse_sigma: float = 0.01
    pulse_amp: float = 0.2
    cycle_duration: float = 0.5
    t_start: float = 0.0
    t_end: float = np.inf
    ceiling: float | None = 1.0
    sharpness: float = 16.0
    extra: dict = field(default_factory=dict)

    def __call__(self, t):
        return synthesize_voltage(self.w, t, **self.params())

    def params(self) -> dict:
        return dict(pulse_dt=self.pulse_dt, pulse_sigma=self.pulse_sigma, pulse_amp=self.pulse_amp,
                     cycle_duration=self.cycle_duration, t_start=self.t_start, t_end=self.t_end,
                     ceiling=self.ceiling, sharpness=self.sharpness)


def soft_ceiling(raw, ceiling, sharpness: float = 16.0):
    """Smooth monotone clip ``raw * (1 + (raw/c)**q)**(-1/q)``; zero stays zero."""
    raw = np.asarray(raw, dtype=float)
    if ceiling is None:
        return raw.copy()
    r = np.maximum(raw, 0.0) / ceiling
    return raw * (1.0 + r ** sharpness) ** (-1.0 / sharpness)


def soft_ceiling_grad(raw, ceiling, sharpness: float = 16.0):
    raw = np.asarray(raw, dtype=float)
    if ceiling is None:
        return np.ones_like(raw)
    r = np.maximum(raw, 0.0) / ceiling
    return (1.0 + r ** sharpness) ** (-1.0 / sharpness - 1.0)


def pulse_basis(t_cycle, n_pulses: int, pulse_dt: float, sigma: float, amp: float, cycle: float):
    """Gaussian pulse basis evaluated at cycle-local times, wrapped periodically."""
    t_cycle = np.atleast_1d(np.asarray(t_cycle, dtype=float))
    centers = np.arange(n_pulses) * pulse_dt
    d = t_cycle[:, None] - centers[None, :]
    d = np.mod(d + 0.5 * cycle, cycle) - 0.5 * cycle
    return amp * np.exp(-d * d / (2.0 * sigma * sigma))


def synthesize_voltage(w, t, pulse_dt=0.002, pulse_sigma=0.01, pulse_amp=0.2, cycle_duration=0.5,
                       t_start=0.0, t_end=np.inf, ceiling=1.0, sharpness=16.0):
    """Normalized voltage per actuator at time(s) ``t``; shape ``(len(t), n_act)`` or ``(n_act,)``."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    active = (t >= t_start) & (t < t_end)
    t_cyc = np.mod(t - t_start, cycle_duration)
    B = pulse_basis(t_cyc, w.shape[1], pulse_dt, pulse_sigma, pulse_amp, cycle_duration)
    V = soft_ceiling(B @ w.T, ceiling, sharpness)
    V[~active] = 0.0
    return V[0] if scalar else V


class VoltageTable:
    """Per-step voltages for a fixed schedule, with the adjoint back to pulse weights."""

    def __init__(self, n_pulses, dt, n_start, n_end, cycle_steps, pulse_dt, sigma, amp, ceiling, sharpness):
        self.n_start = int(n_start)
        self.n_end = int(n_end)
        self.cycle_steps = int(cycle_steps)
        self.ceiling = ceiling
        self.sharpness = sharpness
        t_cyc = np.arange(self.cycle_steps) * dt
        self.basis = pulse_basis(t_cyc, n_pulses, pulse_dt, sigma, amp, self.cycle_steps * dt)
        self.raw = None
        self.V = None

    def update(self, w):
        w = np.atleast_2d(np.asarray(w, dtype=float))
        self.raw = self.basis @ w.T                       # (cycle_steps, n_act)
        self.V = soft_ceiling(self.raw, self.ceiling, self.sharpness)
        self.n_act = w.shape[0]
        return self

    def at(self, n: int) -> np.ndarray:
        if n < self.n_start or n >= self.n_end or self.V is None:
            return np.zeros(self.n_act if self.V is not None else 0)
        return self.V[(n - self.n_start) % self.cycle_steps]

    def pullback(self, V_bar_steps: dict | np.ndarray) -> np.ndarray:
        """``V_bar_steps[n]`` holds dL/dV at step n; returns dL/dw with shape (n_act, n_pulses)."""
        folded = np.zeros_like(self.raw)
        if isinstance(V_bar_steps, dict):
            items = V_bar_steps.items()
        else:
            items = ((n, V_bar_steps[n]) for n in range(len(V_bar_steps)))
        for n, vb in items:
            if self.n_start <= n < self.n_end:
                folded[(n - self.n_start) % self.cycle_steps] += vb
        folded *= soft_ceiling_grad(self.raw, self.ceiling, self.sharpness)
        return (self.basis.T @ folded).T


def stroke_attenuation(length, L0=0.065, dL=0.015, L_core=0.030):
    """1 when fully contracted, linear falloff over the core length, 0 once disengaged."""
    length = np.asarray(length, dtype=float)
    lc = L0 - dL
    return np.clip(1.0 - (length - lc) / L_core, 0.0, 1.0)


def stroke_attenuation_grad(length, L0=0.065, dL=0.015, L_core=0.030):
    length = np.asarray(length, dtype=float)
    lc = L0 - dL
    inside = (length > lc) & (length < lc + L_core)
    return np.where(inside, -1.0 / L_core, 0.0)


def solenoid_force(V_in, length, unit: ActuatorUnit):
    """Contractile axial force magnitude ``F_max * V_in * eta_stroke(length)`` (N)."""
    return unit.F_max * np.asarray(V_in, dtype=float) * stroke_attenuation(length, unit.L0, unit.dL, unit.L_core)


def solenoid_force_pair(xa, xb, V_in, unit: ActuatorUnit):
    """Equal and opposite nodal forces pulling the two axial endpoints together."""
    d = np.asarray(xa, dtype=float) - np.asarray(xb, dtype=float)
    ell = np.linalg.norm(d)
    F = float(solenoid_force(V_in, ell, unit))
    n = d / ell
    return -F * n, F * n


def axial_state_switch(length, unit: ActuatorUnit):
    """Return ``(kappa, reference_length, engaged)``; the threshold itself counts as engaged."""
    if length <= unit.L_contracted:
        return unit.kappa_act, unit.L_contracted, True
    return unit.kappa_free, unit.L0, False
