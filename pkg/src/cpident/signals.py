"""Wind inputs, measurement noise and the low-pass filters of the rig."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import signal as sps


class WindKind(str, enum.Enum):
    LOW_TURBULENCE = "low_turbulence"
    HIGH_TURBULENCE = "high_turbulence"


@dataclass(frozen=True)
class WindScenario:
    """Freestream wind definition.

    Low turbulence: ``schedule`` is a sequence of ``(t, u)`` knots joined by
    linear ramps and held constant outside the knot range. High turbulence:
    an Ornstein-Uhlenbeck process about ``u_mean`` with standard deviation
    ``ti * u_mean`` and correlation time ``t_l``.
    """

    kind: WindKind = WindKind.LOW_TURBULENCE
    u_mean: float = 8.0
    schedule: tuple = ()
    ti: float = 0.0
    t_l: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", WindKind(self.kind))
        object.__setattr__(self, "schedule", tuple((float(t), float(u)) for t, u in self.schedule))
        if not self.u_mean > 0:
            raise ValueError(f"u_mean must be positive, got {self.u_mean}")
        if not 0.0 <= self.ti <= 0.5:
            raise ValueError(f"turbulence intensity must lie in [0, 0.5], got {self.ti}")
        if not self.t_l > 0:
            raise ValueError(f"integral time scale must be positive, got {self.t_l}")
        if self.kind == WindKind.LOW_TURBULENCE:
            if not self.schedule:
                raise ValueError("low-turbulence wind needs a non-empty (t, u) schedule")
            times = [t for t, _ in self.schedule]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValueError("schedule times must be strictly increasing")
            if any(u <= 0 for _, u in self.schedule):
                raise ValueError("schedule wind speeds must be positive")


@dataclass(frozen=True)
class NoiseSpec:
    """Relative (multiplicative) Gaussian measurement noise levels."""

    sigma_omega_rel: float = 0.01
    sigma_u_rel: float = 0.01
    sigma_tau_rel: float = 0.01
    seed: int = 0

    def __post_init__(self):
        for name in ("sigma_omega_rel", "sigma_u_rel", "sigma_tau_rel"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def n_samples(duration, f_s):
    if not (duration > 0 and f_s > 0):
        raise ValueError("duration and f_s must be positive")
    return int(round(duration * f_s)) + 1


def ou_process(n, f_s, mean, std, t_l, rng):
    """Exact discretisation of a stationary Ornstein-Uhlenbeck process."""
    a = math.exp(-1.0 / (f_s * t_l))
    b = std * math.sqrt(1.0 - a * a)
    xi = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = std * xi[0]
    for k in range(1, n):
        x[k] = a * x[k - 1] + b * xi[k]
    return mean + x


def gen_wind(scenario, duration, f_s):
    n = n_samples(duration, f_s)
    t = np.arange(n) / f_s
    if scenario.kind == WindKind.LOW_TURBULENCE:
        knots_t = np.array([k[0] for k in scenario.schedule])
        knots_u = np.array([k[1] for k in scenario.schedule])
        return np.interp(t, knots_t, knots_u)
    if scenario.ti == 0.0:
        return np.full(n, scenario.u_mean)
    rng = np.random.default_rng(scenario.seed)
    u = ou_process(n, f_s, scenario.u_mean, scenario.ti * scenario.u_mean, scenario.t_l, rng)
    return np.maximum(u, 0.5 * scenario.u_mean)


def measured_wind(u_true, scenario, f_s, correlation, seed):
    """Anemometer signal with prescribed correlation to the wind the rotor sees.

    Mixes the fluctuation of ``u_true`` with an independent OU path of the
    same statistics; ``correlation`` = 1 returns ``u_true`` unchanged.
    """
    if not -1.0 <= correlation <= 1.0:
        raise ValueError("correlation must lie in [-1, 1]")
    if correlation == 1.0:
        return np.asarray(u_true, dtype=float).copy()
    rng = np.random.default_rng(seed)
    other = ou_process(len(u_true), f_s, 0.0, scenario.ti * scenario.u_mean, scenario.t_l, rng)
    fluct = np.asarray(u_true) - scenario.u_mean
    u = scenario.u_mean + correlation * fluct + math.sqrt(1.0 - correlation**2) * other
    return np.maximum(u, 0.5 * scenario.u_mean)


def prandtl_velocity(delta_p, rho):
    """Wind speed from Prandtl-tube dynamic pressure, u = sqrt(2 Δp / ρ)."""
    delta_p = np.asarray(delta_p, dtype=float)
    if np.any(delta_p < 0):
        raise ValueError("dynamic pressure must be non-negative")
    out = np.sqrt(2.0 * delta_p / rho)
    return float(out) if out.ndim == 0 else out


def dynamic_pressure(u, rho):
    return 0.5 * rho * np.asarray(u, dtype=float) ** 2


def add_relative_noise(x, sigma_rel, rng):
    x = np.asarray(x, dtype=float)
    if sigma_rel == 0:
        return x.copy()
    return x * (1.0 + sigma_rel * rng.standard_normal(x.shape))


def butter_coeffs(f_s, cutoff, order):
    """Digital Butterworth low-pass (bilinear transform, cutoff pre-warped)."""
    if not 0 < cutoff < f_s / 2:
        raise ValueError(f"cutoff {cutoff} Hz must lie strictly between 0 and Nyquist ({f_s / 2} Hz)")
    if order < 1:
        raise ValueError("filter order must be >= 1")
    return sps.butter(order, cutoff, btype="low", fs=f_s)


def butterworth_lowpass(series, f_s, cutoff=2.0, order=4, mode="zero_phase"):
    """Low-pass a sampled series.

    ``causal`` runs the filter forward from a steady state matched to the
    first sample. ``zero_phase`` runs it forward and backward (effective
    order doubled, no phase lag) after odd-reflective padding of three filter
    time constants, ``order / (2 pi cutoff)`` each.
    """
    x = np.asarray(series, dtype=float)
    b, a = butter_coeffs(f_s, cutoff, order)
    if x.size == 0:
        return x.copy()
    if mode == "causal":
        zi = sps.lfilter_zi(b, a) * x[0]
        y, _ = sps.lfilter(b, a, x, zi=zi)
        return y
    if mode == "zero_phase":
        padlen = int(math.ceil(3.0 * order * f_s / (2.0 * math.pi * cutoff)))
        padlen = min(padlen, x.size - 1)
        return sps.filtfilt(b, a, x, padtype="odd", padlen=padlen)
    raise ValueError(f"unknown filter mode {mode!r}")


class CausalLowPass:
    """Sample-by-sample Butterworth low-pass, initialised at steady state on the first input."""

    def __init__(self, f_s, cutoff=2.0, order=1):
        self.b, self.a = butter_coeffs(f_s, cutoff, order)
        self._zi_unit = sps.lfilter_zi(self.b, self.a)
        self._z = None

    def reset(self):
        self._z = None

    def __call__(self, x):
        x = float(x)
        if self._z is None:
            self._z = self._zi_unit * x
        y, self._z = sps.lfilter(self.b, self.a, [x], zi=self._z)
        return float(y[0])
