"""Kω² torque control through the generator load resistance.

With τ_g = k_τ k_ω ω / (R_tot + R_v), the law τ_g = K ω² becomes
R_v = k_τ k_ω / (K ω) − R_tot. Choosing K = ½ρπR²·R³·Cp_ref/λ_ref³ makes
λ_ref an equilibrium whenever the controller's Cp map matches the plant.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .basis import AuxKind, cp_eval
from .dynamics import DEFAULT_FS, DEFAULT_SUBSTEPS, OMEGA_FLOOR, IntegrationError, Trajectory, annotate
from .signals import CausalLowPass

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class ResistorBank:
    """Loads reachable by switching binary-weighted resistors in parallel.

    Resistor k is ``r_max / 2**k``; a code ``n`` (1 .. 2**bits − 1) switches in
    the resistors of its set bits, giving a conductance ``n / r_max``.
    """

    bits: int = 12
    r_max: float = 1024.0

    def __post_init__(self):
        if self.bits < 1 or not self.r_max > 0:
            raise ValueError("need at least one resistor and a positive r_max")
        codes = np.arange(2**self.bits - 1, 0, -1)
        object.__setattr__(self, "_values", self.r_max / codes)

    @property
    def values(self):
        return self._values

    @property
    def min(self):
        return float(self._values[0])

    @property
    def max(self):
        return float(self._values[-1])

    def code(self, value):
        """Switch pattern (a_bin) of a bank value."""
        n = int(round(self.r_max / value))
        if not 1 <= n < 2**self.bits or not math.isclose(self.r_max / n, value, rel_tol=1e-12):
            raise ValueError(f"{value} is not a bank value")
        return n

    def snap(self, r):
        """Nearest bank value after clamping to [min, max]; ties go to the larger value."""
        v = self._values
        r = min(max(float(r), self.min), self.max)
        i = int(np.searchsorted(v, r))
        if i == 0:
            return float(v[0])
        if i >= len(v):
            return float(v[-1])
        lo, hi = v[i - 1], v[i]
        return float(hi if hi - r <= r - lo else lo)


def support(model):
    cfg = model.config
    return cfg.centers[0] - cfg.radius, cfg.centers[-1] + cfg.radius


def find_optimum(model, aux):
    """(λ_max, Cp_max) over the basis support: 0.01 grid, then golden-section refinement.

    The grid argmax takes the first maximum, so exact ties resolve to the
    smaller λ.
    """
    lo, hi = support(model)
    grid = np.arange(lo, hi + 1e-12, 0.01)
    cps = cp_eval(model, grid, aux)
    i = int(np.argmax(cps))
    if cps[i] <= 0:
        raise ValueError(f"Cp map has no positive value at aux={aux}")
    f = lambda lam: float(cp_eval(model, lam, aux))
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    c, d = b - GOLDEN * (b - a), a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > 1e-5:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    lam = 0.5 * (a + b)
    cp = f(lam)
    if cp < cps[i]:
        return float(grid[i]), float(cps[i])
    return lam, cp


def k_gain(lambda_ref, cp_ref, params):
    if not lambda_ref > 0:
        raise ValueError("lambda_ref must be positive")
    return 0.5 * params.rho * params.area * params.R**3 * cp_ref / lambda_ref**3


def ideal_resistance(K, omega, params):
    """Unquantised R_v = k_τ k_ω / (K ω) − R_tot; infinite when K = 0."""
    if K <= 0:
        return math.inf
    return params.k_tau * params.k_omega / (K * omega) - params.R_tot


@dataclass
class Kw2Controller:
    """Kω² law on one rotor, with causal first-order filtering of its inputs.

    ``cp_ref`` is re-evaluated from the controller's own map at every update
    using the filtered auxiliary input, so changes in Reynolds number or in
    the upstream rotor's tip-speed ratio move K along with them.
    """

    model: object  # CpSurrogate
    params: object  # TurbineParams
    lambda_ref: float
    bank: ResistorBank = field(default_factory=ResistorBank)
    f_s: float = DEFAULT_FS
    cutoff: float = 2.0
    K: float = 0.0
    cp_ref: float = 0.0

    def __post_init__(self):
        self.check_reference(self.lambda_ref)
        self._f_omega = CausalLowPass(self.f_s, self.cutoff, 1)
        self._f_aux = CausalLowPass(self.f_s, self.cutoff, 1)

    def check_reference(self, lam):
        lo, hi = support(self.model)
        if not lo < lam < hi:
            raise ValueError(f"lambda_ref {lam} lies outside the model support ({lo}, {hi})")

    def set_reference(self, lam):
        self.check_reference(lam)
        self.lambda_ref = float(lam)

    def update_gain(self, aux):
        self.cp_ref = max(float(cp_eval(self.model, self.lambda_ref, aux)), 0.0)
        self.K = k_gain(self.lambda_ref, self.cp_ref, self.params)
        return self.K

    def __call__(self, omega_meas, aux_meas):
        omega = max(self._f_omega(omega_meas), OMEGA_FLOOR)
        self.update_gain(self._f_aux(aux_meas))
        return resistance_command(self, omega)

    def reset(self):
        self._f_omega.reset()
        self._f_aux.reset()


def resistance_command(controller, omega):
    return controller.bank.snap(ideal_resistance(controller.K, omega, controller.params))


@dataclass(frozen=True)
class FixedLoad:
    R_v: float
    lambda_ref: float = None  # only for reporting tracking metrics


@dataclass(frozen=True)
class Setpoints:
    """Piecewise-constant reference: ``knots`` are (t_start, λ_ref) pairs."""

    knots: tuple

    def __post_init__(self):
        knots = tuple((float(t), float(v)) for t, v in self.knots)
        if not knots:
            raise ValueError("empty setpoint schedule")
        if any(b[0] <= a[0] for a, b in zip(knots, knots[1:])):
            raise ValueError("setpoint times must be strictly increasing")
        object.__setattr__(self, "knots", knots)

    def at(self, t):
        value = self.knots[0][1]
        for tk, v in self.knots:
            if tk <= t + 1e-12:
                value = v
        return value

    def series(self, t):
        return np.array([self.at(x) for x in t])


@dataclass
class ClosedLoopResult:
    trajectory: Trajectory
    lambda_refs: np.ndarray  # (n, K), NaN where no reference applies
    metrics: list  # per turbine dicts
    segments: list  # per turbine lists of per-segment dicts


def _tracking(lam, ref, t, settle):
    """Mean/RMS of λ − λ_ref after ``settle`` seconds into each constant-reference segment."""
    mask = np.zeros(len(t), dtype=bool)
    segments = []
    change = np.flatnonzero(np.diff(ref) != 0) + 1
    bounds = np.concatenate([[0], change, [len(t)]])
    for a, b in zip(bounds[:-1], bounds[1:]):
        sel = np.arange(a, b)[t[a:b] >= t[a] + settle]
        if np.isnan(ref[a]) or sel.size == 0:
            continue
        mask[sel] = True
        err = lam[sel] - ref[sel]
        segments.append({"t_start": float(t[a]), "t_end": float(t[b - 1]), "lambda_ref": float(ref[a]),
                         "mean_error": float(err.mean()), "rms_error": float(np.sqrt(np.mean(err**2))),
                         "max_abs_error": float(np.abs(err).max())})
    if not mask.any():
        return {"mean_error": math.nan, "rms_error": math.nan, "max_abs_error": math.nan}, segments
    err = lam[mask] - ref[mask]
    return {"mean_error": float(err.mean()), "rms_error": float(np.sqrt(np.mean(err**2))),
            "max_abs_error": float(np.abs(err).max())}, segments


def closed_loop(twin, controllers, setpoints, u1, f_s=DEFAULT_FS, omega0=None, settle=5.0,
                substeps=DEFAULT_SUBSTEPS, noise=None):
    """Simulate the twin under per-rotor controllers updated once per sample.

    ``controllers[i]`` is a :class:`Kw2Controller` (whose reference follows
    ``setpoints[i]``) or a :class:`FixedLoad`. The controllers see the rotor
    speeds and wind, optionally corrupted by relative noise ``noise``
    (a NoiseSpec), and hold their command over the next sample interval.
    """
    u1 = np.asarray(u1, dtype=float)
    n = len(u1)
    K = len(twin)
    if len(controllers) != K or len(setpoints) != K:
        raise ValueError("need one controller and one setpoint schedule (or None) per turbine")
    t = np.arange(n) / f_s
    refs = np.full((n, K), np.nan)
    for i, (c, sp) in enumerate(zip(controllers, setpoints)):
        if sp is not None:
            refs[:, i] = sp.series(t)
            if isinstance(c, Kw2Controller):
                for _, v in sp.knots:
                    c.check_reference(v)
        elif isinstance(c, FixedLoad) and c.lambda_ref is not None:
            refs[:, i] = c.lambda_ref
        elif isinstance(c, Kw2Controller):
            refs[:, i] = c.lambda_ref
    rng = np.random.default_rng(noise.seed) if noise is not None else None
    packed = twin._packed()
    params = twin.params
    if omega0 is None:
        omega0 = np.array([refs[0, i] if np.isfinite(refs[0, i]) else 5.0 for i in range(K)]) * u1[0]
        omega0 = omega0 / np.array([p.R for p in params])
    omegas = np.empty((n, K))
    R_vs = np.empty((n, K))
    omegas[0] = np.maximum(np.asarray(omega0, dtype=float), OMEGA_FLOOR)
    for c in controllers:
        if isinstance(c, Kw2Controller):
            c.reset()
    dt = 1.0 / f_s
    for k in range(n):
        w_meas = omegas[k] * (1.0 + noise.sigma_omega_rel * rng.standard_normal(K)) if rng is not None else omegas[k]
        u_meas = u1[k] * (1.0 + noise.sigma_u_rel * rng.standard_normal()) if rng is not None else u1[k]
        for i, c in enumerate(controllers):
            if isinstance(c, FixedLoad):
                R_vs[k, i] = c.R_v
                continue
            if np.isfinite(refs[k, i]) and refs[k, i] != c.lambda_ref:
                c.set_reference(refs[k, i])
            if c.model.config.aux_kind == AuxKind.REYNOLDS:
                aux = float(params[i].reynolds(u_meas))
            else:
                aux = w_meas[i - 1] * params[i - 1].R / u_meas
            R_vs[k, i] = c(w_meas[i], aux)
        if k == n - 1:
            break
        step, n_ok = _kernels.forward_array(omegas[k].copy(), u1[k: k + 2].copy(), R_vs[k: k + 1].repeat(2, axis=0),
                                            *packed, dt, int(substeps))
        if n_ok < 1:
            raise IntegrationError(f"non-finite rotor speed during sample interval {k}", k)
        omegas[k + 1] = step[1]
    traj = annotate(Trajectory(t=t, u1=u1.copy(), omegas=omegas, R_vs=R_vs), twin)
    metrics, segments = [], []
    for i in range(K):
        m, s = _tracking(traj.lambdas[:, i], refs[:, i], t, settle)
        metrics.append(m)
        segments.append(s)
    return ClosedLoopResult(traj, refs, metrics, segments)
