"""Synthetic digital twin of the two-turbine wind-tunnel rig.

The truth maps use the same bump shape as the identification basis but with
centres extended to λ = 1..11, so they are not representable by the default
5-centre basis near the edges of the operating envelope. Between λ = 4.5 and
7.5 only centres 4..8 are active, so there the truth is representable.

Freestream:  Cp₁(λ, Re) = g(λ) · (0.85 + 0.2 x − 0.05 x²),  x = Re / 8e4
Waked:       Cpᵢ(λ, λ_up) = g(λ) · (0.5 + 0.06 (λ_up − 5)²)

with g peaking at ≈0.406 near λ = 5.1. The waked factor is smallest when the
upstream rotor runs near its optimum and extracts the most energy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .basis import AuxKind, BasisConfig, CpSurrogate, cp_eval
from .data import Episode, SteadySample
from .dynamics import ArrayModel, TurbineParams, aero_torque, gen_torque, integrate
from .signals import (NoiseSpec, WindKind, WindScenario, add_relative_noise, gen_wind, measured_wind,
                      n_samples)

TRUTH_CENTERS = tuple(float(c) for c in range(1, 12))
TRUTH_PROFILE = np.array([0.0, 0.16, 0.29, 0.33, 0.37, 0.35, 0.30, 0.22, 0.13, 0.05, 0.0])
FREESTREAM_RE_POLY = np.array([0.85, 0.2, -0.05])
# 0.5 + 0.06 (x - 5)^2 expanded in powers of x
WAKED_TSR_POLY = np.array([0.5 + 0.06 * 25.0, -0.06 * 10.0, 0.06])
STABLE_ENVELOPE = (3.5, 8.5)


def make_twin_truth(kind):
    """Ground-truth Cp surrogate, ``kind`` in {"freestream", "waked"}."""
    if kind == "freestream":
        cfg = BasisConfig.freestream(centers=TRUTH_CENTERS)
        return CpSurrogate(cfg, np.outer(TRUTH_PROFILE, FREESTREAM_RE_POLY))
    if kind == "waked":
        cfg = BasisConfig.waked(centers=TRUTH_CENTERS)
        return CpSurrogate(cfg, np.outer(TRUTH_PROFILE, WAKED_TSR_POLY))
    raise ValueError(f"unknown twin kind {kind!r}")


def make_twin_array(n_turbines=2, params=None, spacing=0.6):
    params = params or TurbineParams()
    turbines = [(params, make_twin_truth("freestream"))]
    turbines += [(params, make_twin_truth("waked")) for _ in range(n_turbines - 1)]
    return ArrayModel(tuple(turbines), spacing)


def equilibrium_omegas(twin, u, R_vs, settle=10.0, f_s=20.0):
    """Rotor speeds after holding (u, R_vs) constant for ``settle`` seconds from a mid-range start."""
    n = int(round(settle * f_s)) + 1
    K = len(twin)
    omega0 = np.array([5.5 * u / p.R for p in twin.params])
    traj = integrate(twin, omega0, np.full(n, u), np.broadcast_to(np.asarray(R_vs, dtype=float), (n, K)), f_s)
    return traj.omegas[-1].copy()


def synth_episode(twin, u_true, R_vs, noise=NoiseSpec(), f_s=20.0, u_measured=None, omega0=None):
    """Simulate the twin and corrupt the rotor-speed and wind channels with relative noise.

    The rotors start at the equilibrium of the first input sample unless
    ``omega0`` is given. ``u_measured`` replaces the true wind as the
    anemometer signal before noise is added.
    """
    u_true = np.asarray(u_true, dtype=float)
    n = len(u_true)
    K = len(twin)
    R_vs = np.ascontiguousarray(np.broadcast_to(np.asarray(R_vs, dtype=float), (n, K)))
    if omega0 is None:
        omega0 = equilibrium_omegas(twin, u_true[0], R_vs[0], f_s=f_s)
    traj = integrate(twin, omega0, u_true, R_vs, f_s)
    rng = np.random.default_rng(noise.seed)
    omegas_meas = add_relative_noise(traj.omegas, noise.sigma_omega_rel, rng)
    u_src = u_true if u_measured is None else np.asarray(u_measured, dtype=float)
    u_meas = add_relative_noise(u_src, noise.sigma_u_rel, rng)
    sigma = noise.sigma_omega_rel * traj.omegas.mean(axis=0)
    return Episode(t=traj.t, u1=u_meas, omegas_meas=omegas_meas, R_vs=R_vs, sigma_omega=sigma, f_s=f_s,
                   u1_true=u_true, omegas_true=traj.omegas)


def steady_state_rv(surrogate, params, lam, u, aux):
    """Load resistance holding the rotor at tip-speed ratio ``lam``; negative if unreachable."""
    omega = lam * u / params.R
    cp = cp_eval(surrogate, lam, aux)
    tau_a = aero_torque(omega, u, cp, params)
    if tau_a <= 0:
        return math.inf
    return params.k_tau * params.k_omega * omega / tau_a - params.R_tot


def synth_steady_grid(surrogate, params, lambdas, aux_values, noise=NoiseSpec(), u_waked=8.0):
    """Noisy steady-state samples on a λ x aux grid, row-major in λ.

    For a Reynolds-number surrogate each column's wind speed follows from its
    Re; a waked surrogate uses ``u_waked`` throughout. Noise perturbs the
    measured ω and u; the torque standard deviation only enters the
    reported σ used for weighting.
    """
    rng = np.random.default_rng(noise.seed)
    reynolds = surrogate.config.aux_kind == AuxKind.REYNOLDS
    samples = []
    for lam in lambdas:
        for aux in aux_values:
            u = aux * params.nu / params.D if reynolds else u_waked
            R_v = steady_state_rv(surrogate, params, lam, u, aux)
            if not 0 <= R_v < math.inf:
                raise ValueError(f"no steady state with R_v >= 0 at lambda={lam}, aux={aux}")
            omega = lam * u / params.R
            tau = float(gen_torque(omega, R_v, params))
            omega_m = omega * (1.0 + noise.sigma_omega_rel * rng.standard_normal())
            u_m = u * (1.0 + noise.sigma_u_rel * rng.standard_normal())
            aux_m = float(params.reynolds(u_m)) if reynolds else aux
            samples.append(SteadySample(
                omega=omega_m, u1=u_m, R_v=R_v,
                sigma_omega=noise.sigma_omega_rel * omega, sigma_u=noise.sigma_u_rel * u,
                sigma_tau=noise.sigma_tau_rel * tau, aux=aux_m,
            ))
    return samples


# ------------------------------------------------------------ scenario suites

def ramp_schedule(rng, duration, u_range=(6.5, 9.5), knot_every=8.0):
    """Random wind knots joined by ramps, as (t, u) pairs."""
    times = np.arange(0.0, duration + 1e-9, knot_every)
    if times[-1] < duration:
        times = np.append(times, duration)
    return tuple((float(t), float(rng.uniform(*u_range))) for t in times)


def step_schedule(rng, n, f_s, r_range, hold=(2.0, 5.0)):
    """Piecewise-constant load with log-uniform levels and uniform hold times."""
    out = np.empty(n)
    k = 0
    lo, hi = np.log(r_range[0]), np.log(r_range[1])
    while k < n:
        length = max(1, int(round(rng.uniform(*hold) * f_s)))
        out[k: k + length] = np.exp(rng.uniform(lo, hi))
        k += length
    return out


@dataclass(frozen=True)
class SuiteConfig:
    """Episode suite on the twin; the first ``n_train`` episodes train, the rest test."""

    kind: str = "low_turbulence"
    n_turbines: int = 2
    n_train: int = 7
    n_test: int = 4
    duration: float = 32.0
    f_s: float = 20.0
    seed: int = 0
    noise: NoiseSpec = NoiseSpec()
    rv_ranges: tuple = ((1.5, 12.0), (5.0, 14.0))
    u_range: tuple = (6.5, 9.5)
    schedule: tuple = None  # fixed (t, u) knots for every episode instead of random ramps
    # high turbulence
    u_mean: float = 8.5
    ti: float = 0.12
    t_l: float = 0.3
    correlation: float = 0.2
    fixed_rv: tuple = (2.0, 8.0, 8.0)

    def __post_init__(self):
        if self.kind not in ("low_turbulence", "high_turbulence"):
            raise ValueError(f"unknown suite kind {self.kind!r}")
        if self.n_train < 1 or self.n_test < 0:
            raise ValueError("need at least one training episode")
        if self.n_turbines < 1:
            raise ValueError("need at least one turbine")
        if self.schedule is not None and len(self.schedule) == 0:
            raise ValueError("schedule: empty wind schedule")


def make_suite(config, twin=None):
    """Generate ``(train, test)`` episode lists from a :class:`SuiteConfig`."""
    twin = twin or make_twin_array(config.n_turbines)
    ss = np.random.SeedSequence(config.seed)
    episodes = []
    for child in ss.spawn(config.n_train + config.n_test):
        rng = np.random.default_rng(child)
        noise_seed, wind_seed, meas_seed = (int(s) for s in rng.integers(0, 2**31, size=3))
        noise = replace(config.noise, seed=noise_seed)
        n = n_samples(config.duration, config.f_s)
        if config.kind == "low_turbulence":
            sched = config.schedule if config.schedule is not None else ramp_schedule(rng, config.duration, config.u_range)
            u = gen_wind(WindScenario(WindKind.LOW_TURBULENCE, schedule=sched), config.duration, config.f_s)
            R_vs = np.column_stack([
                step_schedule(rng, n, config.f_s, config.rv_ranges[min(i, len(config.rv_ranges) - 1)])
                for i in range(config.n_turbines)
            ])
            episodes.append(synth_episode(twin, u, R_vs, noise, config.f_s))
        else:
            scen = WindScenario(WindKind.HIGH_TURBULENCE, u_mean=config.u_mean, ti=config.ti,
                                t_l=config.t_l, seed=wind_seed)
            u = gen_wind(scen, config.duration, config.f_s)
            u_meas = measured_wind(u, scen, config.f_s, config.correlation, meas_seed)
            rv = [config.fixed_rv[min(i, len(config.fixed_rv) - 1)] for i in range(config.n_turbines)]
            R_vs = np.tile(np.asarray(rv, dtype=float), (n, 1))
            episodes.append(synth_episode(twin, u, R_vs, noise, config.f_s, u_measured=u_meas))
    return episodes[: config.n_train], episodes[config.n_train:]


def clean_turbine_data(episode, turbine, params):
    """Noise-free single-turbine view of a synthetic episode, for evaluating model error alone."""
    from .identify import TurbineData

    if episode.u1_true is None or episode.omegas_true is None:
        raise ValueError("episode carries no true series")
    u = episode.u1_true
    if turbine == 0:
        aux = params.reynolds(u)
    else:
        aux = episode.omegas_true[:, turbine - 1] * params.R / u
    w = episode.omegas_true[:, turbine]
    return TurbineData(episode.f_s, u.copy(), episode.R_vs[:, turbine].copy(), np.asarray(aux, dtype=float),
                       w.copy(), float(w[0]), w.copy())
