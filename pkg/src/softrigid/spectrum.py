"""Fourier analysis of actuation signals over one cycle."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SpectrumError


@dataclass
class SpectrumReport:
    frequencies_hz: np.ndarray       # dominant frequency per actuator
    dominant_hz: float               # shared bin used for the phase delay
    phase_delay_rad: float | None    # angle(ref) - angle(other), wrapped to (-pi, pi]
    magnitudes: np.ndarray           # (n_act, n_bins)
    bin_hz: np.ndarray


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2.0 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)


def analyze_spectrum(series, dt: float, cycle_duration: float, ref: int = 0, other: int = 1) -> SpectrumReport:
    """Dominant frequencies and the phase delay between actuators ``ref`` and ``other``.

    ``series`` is ``(n_samples, n_act)`` sampled every ``dt``; only the first
    cycle is transformed. A positive delay means ``other`` lags ``ref``.
    """
    X = np.asarray(series, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = int(round(cycle_duration / dt))
    if n < 2 or X.shape[0] < n:
        raise SpectrumError(f"series has {X.shape[0]} samples, one cycle needs {n}")
    if abs(X.shape[0] / n - round(X.shape[0] / n)) > 1e-9:
        raise SpectrumError("series does not cover a whole number of cycles")
    spec = np.fft.rfft(X[:n], axis=0).T
    freqs = np.fft.rfftfreq(n, dt)
    mag = np.abs(spec)
    tol = 1e-9 * max(mag.max(), 1.0) * n
    if mag.shape[1] < 2 or np.all(mag[:, 1:] <= tol):
        raise SpectrumError("no nonzero frequency content (constant signal)")
    dom = 1 + np.argmax(mag[:, 1:], axis=1)
    delay = None
    shared = 1 + int(np.argmax(mag[:, 1:].sum(axis=0)))
    if X.shape[1] > max(ref, other):
        delay = float(wrap_angle(np.angle(spec[ref, shared]) - np.angle(spec[other, shared])))
    return SpectrumReport(freqs[dom], float(freqs[shared]), delay, mag, freqs)


def check_lengths(a, b):
    if len(a) != len(b):
        raise SpectrumError(f"mismatched series lengths {len(a)} and {len(b)}")
    return np.column_stack([a, b])
