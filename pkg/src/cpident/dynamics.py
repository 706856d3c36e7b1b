"""Rotor angular-momentum dynamics for a single turbine or an aligned array.

Each rotor obeys

    J dω/dt = ½ ρ π R² Cp(λ, aux) u₁³ / ω − k_τ k_ω ω / (R_tot + R_v)

with λ = ωR/u₁. The first rotor's auxiliary variable is the Reynolds number
u₁·2R/ν, every following rotor uses the tip-speed ratio of the rotor in front
of it, so the wake deficit is carried entirely by the waked Cp map.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .basis import AuxKind, cp_eval, cp_grad_aux, cp_grad_lambda, psi_matrix

OMEGA_FLOOR = 1.0  # rad/s
DEFAULT_SUBSTEPS = 10
DEFAULT_FS = 20.0  # Hz


class IntegrationError(RuntimeError):
    """Raised when the state becomes non-finite; ``step`` is the failing sample interval."""

    def __init__(self, message, step):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class TurbineParams:
    """Physical and electrical constants of one scale-model rotor.

    J and R are the rig's CAD inertia and rotor radius. The motor constants
    and R_tot are chosen so that R_v = 1 Ω at u = 8.5 m/s gives λ ≈ 4.5 on the
    twin, which is the rig's reported farm operating point.
    """

    J: float = 2.5e-6  # kg m^2
    R: float = 0.075  # m
    rho: float = 1.2  # kg m^-3
    nu: float = 1.5e-5  # m^2 s^-1
    k_tau: float = 5.85e-3  # N m A^-1
    k_omega: float = 5.85e-3  # V s rad^-1
    R_tot: float = 2.5  # Ω, motor + cable
    eta_gen: float = 1.0
    N_g: float = 1.0

    def __post_init__(self):
        for name in ("J", "R", "rho", "nu", "k_tau", "k_omega"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive, got {value}")
        if not (self.R_tot >= 0 and math.isfinite(self.R_tot)):
            raise ValueError(f"R_tot must be non-negative, got {self.R_tot}")
        if self.eta_gen != 1.0 or self.N_g != 1.0:
            raise ValueError("only a directly coupled generator (eta_gen = N_g = 1) is modelled")

    @property
    def area(self):
        return math.pi * self.R**2

    @property
    def D(self):
        return 2.0 * self.R

    def reynolds(self, u):
        return np.asarray(u, dtype=float) * self.D / self.nu

    def pack(self):
        return np.array([self.J, self.R, self.rho, self.nu, self.k_tau, self.k_omega, self.R_tot, OMEGA_FLOOR])


@dataclass(frozen=True)
class ArrayModel:
    turbines: tuple  # of (TurbineParams, CpSurrogate)
    spacing: float = 0.6  # m, metadata only

    def __post_init__(self):
        turbines = tuple((p, s) for p, s in self.turbines)
        object.__setattr__(self, "turbines", turbines)
        if not turbines:
            raise ValueError("an array needs at least one turbine")
        for i, (_, surrogate) in enumerate(turbines):
            want = AuxKind.REYNOLDS if i == 0 else AuxKind.UPSTREAM_TSR
            if surrogate.config.aux_kind != want:
                raise ValueError(f"turbine {i + 1} surrogate must use aux_kind={want.value}")

    def __len__(self):
        return len(self.turbines)

    @property
    def params(self):
        return [p for p, _ in self.turbines]

    @property
    def surrogates(self):
        return [s for _, s in self.turbines]

    def with_surrogate(self, index, surrogate):
        turbines = list(self.turbines)
        turbines[index] = (turbines[index][0], surrogate)
        return ArrayModel(tuple(turbines), self.spacing)

    def _packed(self):
        K = len(self)
        M = max(s.config.n_rbf for s in self.surrogates)
        N = max(s.config.n_poly for s in self.surrogates)
        W = np.zeros((K, M, N))
        centers = np.zeros((K, M))
        orders = np.zeros((K, N), dtype=np.int64)
        n_centers = np.zeros(K, dtype=np.int64)
        n_orders = np.zeros(K, dtype=np.int64)
        radius = np.zeros(K)
        aux_kind = np.zeros(K, dtype=np.int64)
        aux_scale = np.zeros(K)
        for i, s in enumerate(self.surrogates):
            cfg = s.config
            W[i, : cfg.n_rbf, : cfg.n_poly] = s.weights
            centers[i, : cfg.n_rbf] = cfg.centers
            orders[i, : cfg.n_poly] = cfg.poly_orders
            n_centers[i] = cfg.n_rbf
            n_orders[i] = cfg.n_poly
            radius[i] = cfg.radius
            aux_kind[i] = _kernels.AUX_REYNOLDS if cfg.aux_kind == AuxKind.REYNOLDS else _kernels.AUX_UPSTREAM
            aux_scale[i] = cfg.aux_scale
        P = np.stack([p.pack() for p in self.params])
        return W, centers, n_centers, radius, orders, n_orders, aux_kind, aux_scale, P


@dataclass
class ArrayState:
    omegas: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.omegas = np.maximum(np.asarray(self.omegas, dtype=float), 0.0)


@dataclass
class Trajectory:
    t: np.ndarray
    u1: np.ndarray
    omegas: np.ndarray  # (n, K)
    R_vs: np.ndarray  # (n, K)
    cps: np.ndarray = field(default=None)
    lambdas: np.ndarray = field(default=None)

    @property
    def n_turbines(self):
        return self.omegas.shape[1]


def gen_torque(omega, R_v, params):
    """Generator torque k_τ k_ω ω / (R_tot + R_v), inductance neglected."""
    R_v = np.asarray(R_v, dtype=float)
    if np.any(R_v < 0):
        raise ValueError("load resistance must be non-negative")
    total = params.R_tot + R_v
    if np.any(total <= 0):
        raise ValueError("R_tot + R_v = 0 is a short circuit outside the generator model")
    return params.k_tau * params.k_omega * np.asarray(omega, dtype=float) / total


def aero_torque(omega, u, cp, params):
    """Aerodynamic torque ½ρπR² Cp u³ / ω, with ω floored at ``OMEGA_FLOOR``."""
    if np.any(np.asarray(u) < 0):
        raise ValueError("wind speed must be non-negative")
    omega_eff = np.maximum(np.asarray(omega, dtype=float), OMEGA_FLOOR)
    return 0.5 * params.rho * params.area * np.asarray(cp) * np.asarray(u, dtype=float) ** 3 / omega_eff


def _tsr(omega, u, params):
    return omega * params.R / u if u > 0 else 0.0


def _aux_values(omegas, u1, model):
    aux = []
    for i, (p, _) in enumerate(model.turbines):
        if i == 0:
            aux.append(float(p.reynolds(u1)))
        else:
            prev = model.turbines[i - 1][0]
            aux.append(_tsr(omegas[i - 1], u1, prev))
    return aux


def rhs(state, u1, R_vs, model):
    """dω/dt for every rotor of the array (numpy reference implementation)."""
    omegas = np.asarray(state.omegas if isinstance(state, ArrayState) else state, dtype=float)
    R_vs = np.broadcast_to(np.asarray(R_vs, dtype=float), omegas.shape)
    aux = _aux_values(omegas, u1, model)
    out = np.empty_like(omegas)
    for i, (p, s) in enumerate(model.turbines):
        cp = cp_eval(s, _tsr(omegas[i], u1, p), aux[i])
        out[i] = (aero_torque(omegas[i], u1, cp, p) - gen_torque(omegas[i], R_vs[i], p)) / p.J
    return out


def df_domega(state, u1, R_vs, model):
    """Jacobian entries of :func:`rhs`: (diag, sub) with sub[i] = ∂f_i/∂ω_{i-1}, sub[0] = 0."""
    omegas = np.asarray(state.omegas if isinstance(state, ArrayState) else state, dtype=float)
    R_vs = np.broadcast_to(np.asarray(R_vs, dtype=float), omegas.shape)
    aux = _aux_values(omegas, u1, model)
    diag = np.empty_like(omegas)
    sub = np.zeros_like(omegas)
    for i, (p, s) in enumerate(model.turbines):
        w = omegas[i]
        wf = max(w, OMEGA_FLOOR)
        q = 0.5 * p.rho * p.area * u1**3
        lam = _tsr(w, u1, p)
        cp = cp_eval(s, lam, aux[i])
        d = -p.k_tau * p.k_omega / (p.R_tot + R_vs[i])
        if u1 > 0:
            d += q * cp_grad_lambda(s, lam, aux[i]) * (p.R / u1) / wf
        if w > OMEGA_FLOOR:
            d -= q * cp / wf**2
        diag[i] = d / p.J
        if i > 0 and u1 > 0:
            prev = model.turbines[i - 1][0]
            sub[i] = q / (p.J * wf) * cp_grad_aux(s, lam, aux[i]) * prev.R / u1
    return diag, sub


def _series(x, n, name):
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape[0] != n:
        raise ValueError(f"{name} has {arr.shape[0]} samples, expected {n}")
    return arr


def integrate(model, omega0, u1, R_vs, f_s=DEFAULT_FS, substeps=DEFAULT_SUBSTEPS):
    """Fixed-step RK4 of the array with zero-order-held inputs.

    ``u1`` has one value per sample; ``R_vs`` is (n, K) or broadcastable to
    it. The returned trajectory is reported at the sample instants.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    u1 = np.asarray(u1, dtype=float)
    n = u1.shape[0]
    K = len(model)
    if n < 2:
        raise ValueError("need at least two samples")
    R_vs = np.ascontiguousarray(np.broadcast_to(np.asarray(R_vs, dtype=float), (n, K)))
    if np.any(R_vs < 0):
        raise ValueError("load resistance must be non-negative")
    omega0 = np.asarray(omega0, dtype=float).reshape(K)
    packed = model._packed()
    omegas, n_ok = _kernels.forward_array(
        np.maximum(omega0, OMEGA_FLOOR), u1, R_vs, *packed, 1.0 / f_s, int(substeps)
    )
    if n_ok < n - 1:
        raise IntegrationError(f"non-finite rotor speed during sample interval {n_ok}", n_ok)
    traj = Trajectory(t=np.arange(n) / f_s, u1=u1.copy(), omegas=omegas, R_vs=R_vs.copy())
    annotate(traj, model)
    return traj


def annotate(traj, model):
    """Fill ``cps`` and ``lambdas`` of a trajectory from the model."""
    n, K = traj.omegas.shape
    u = traj.u1
    lambdas = np.zeros((n, K))
    cps = np.zeros((n, K))
    safe_u = np.where(u > 0, u, np.inf)
    for i, (p, s) in enumerate(model.turbines):
        lambdas[:, i] = traj.omegas[:, i] * p.R / safe_u
        aux = p.reynolds(u) if i == 0 else lambdas[:, i - 1]
        cps[:, i] = cp_eval(s, lambdas[:, i], aux)
    traj.lambdas = lambdas
    traj.cps = cps
    return traj


def single_turbine_psi(surrogate, aux_series):
    return np.ascontiguousarray(psi_matrix(aux_series, surrogate.config))
