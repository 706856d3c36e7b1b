"""Power-coefficient identification.

Two stages per turbine:

1. ``wls_init`` fits the weights to steady-state Cp samples on a
   tip-speed-ratio x auxiliary grid with a two-sided weighted pseudo-inverse.
2. ``adam_run`` refines them by minimising the time-averaged squared mismatch
   between simulated and (low-pass filtered) measured rotor speed over a set
   of episodes. Gradients come from one forward and one backward (adjoint)
   sweep per episode, independent of the number of weights.

The backward sweep is the exact discrete adjoint of the RK4 forward solve,
so gradients agree with finite differences of the computed cost to
round-off rather than to discretisation error.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .basis import AuxKind, CpSurrogate, cp_eval, cp_grad_lambda, phi_matrix, psi_matrix
from .dynamics import DEFAULT_SUBSTEPS, OMEGA_FLOOR, gen_torque
from .signals import butterworth_lowpass

log = logging.getLogger(__name__)


class IdentificationError(RuntimeError):
    pass


class ForwardBlowUp(IdentificationError):
    """Forward simulation produced a non-finite state; carries the cost accrued so far."""

    def __init__(self, message, step, partial_cost):
        super().__init__(message)
        self.step = step
        self.partial_cost = partial_cost


@dataclass(frozen=True)
class IdentifyConfig:
    eta_lr: float = 2e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    max_iters: int = 300
    restart_threshold: float = 100.0
    lr_drop_threshold: float = 10.0
    lr_drop_factor: float = 10.0
    filter_cutoff: float = 2.0  # Hz
    filter_order: int = 4
    rel_tol: float = 1e-6
    tol_window: int = 10
    cost_atol: float = 1e-8
    substeps: int = DEFAULT_SUBSTEPS
    filter_inputs: bool = True
    input_cutoff: float = None  # Hz, wind/upstream channels; None -> filter_cutoff

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        for name in ("eta_lr", "restart_threshold", "lr_drop_threshold", "lr_drop_factor", "epsilon"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")


# ------------------------------------------------------------ steady state

def steady_cp(sample, params):
    """Cp = 2 τ_g ω / (ρ π R² u³) and its first-order standard deviation.

    τ_g itself is proportional to ω, hence ∂Cp/∂ω = 2 Cp/ω.
    """
    tau = float(gen_torque(sample.omega, sample.R_v, params))
    denom = params.rho * params.area * sample.u1**3
    if tau == 0 or denom == 0:
        raise ValueError("steady sample gives a zero torque or zero dynamic-pressure denominator")
    cp = 2.0 * tau * sample.omega / denom
    var = ((2.0 * cp / sample.omega * sample.sigma_omega) ** 2
           + (3.0 * cp / sample.u1 * sample.sigma_u) ** 2
           + (cp / tau * sample.sigma_tau) ** 2)
    return cp, math.sqrt(var)


@dataclass
class SteadyGrid:
    lambdas: np.ndarray  # (n_lam,)
    aux: np.ndarray  # (n_aux,)
    cp: np.ndarray  # (n_lam, n_aux)
    sigma: np.ndarray  # (n_lam, n_aux)


def steady_grid(samples, params, shape):
    """Arrange row-major steady samples into an n_λ x n_aux grid.

    Row tip-speed ratios and column auxiliary values are the means of the
    measured values along each row and column.
    """
    n_lam, n_aux = shape
    if len(samples) != n_lam * n_aux:
        raise ValueError(f"expected {n_lam * n_aux} samples for a {n_lam}x{n_aux} grid, got {len(samples)}")
    lam = np.array([s.omega * params.R / s.u1 for s in samples]).reshape(shape)
    aux = np.array([s.aux for s in samples]).reshape(shape)
    cps = np.array([steady_cp(s, params) for s in samples]).reshape(n_lam, n_aux, 2)
    return SteadyGrid(lam.mean(axis=1), aux.mean(axis=0), cps[..., 0], cps[..., 1])


def _full_rank(A):
    return np.linalg.matrix_rank(A) == A.shape[1]


def wls_init(grid, config):
    """Two-sided weighted pseudo-inverse (ΦᵀNΦ)⁻¹ΦᵀN C Ψ(ΨᵀΨ)⁻¹.

    N is diagonal over the tip-speed-ratio rows with entries σ²_min/σ²_j, where
    σ²_j is the mean Cp variance along row j. This is a weighted regression in
    the RBF block followed by an ordinary one in the polynomial block.
    """
    Phi = phi_matrix(grid.lambdas, config)
    Psi = psi_matrix(grid.aux, config)
    if not _full_rank(Phi):
        raise IdentificationError(
            f"RBF block Phi is rank deficient ({np.linalg.matrix_rank(Phi)} < {Phi.shape[1]}): "
            "the tip-speed-ratio grid does not cover every center")
    if not _full_rank(Psi):
        raise IdentificationError(
            f"polynomial block Psi is rank deficient ({np.linalg.matrix_rank(Psi)} < {Psi.shape[1]}): "
            "need more distinct auxiliary values")
    var = np.mean(np.asarray(grid.sigma, dtype=float) ** 2, axis=1)
    finite = np.isfinite(var)
    if np.all(var[finite] == 0):
        prec = np.where(finite, 1.0, 0.0)
    elif np.any(var[finite] == 0):
        raise IdentificationError("some but not all grid rows have zero variance")
    else:
        prec = np.where(finite, var[finite].min() / np.where(finite, var, 1.0), 0.0)
    sw = np.sqrt(prec)[:, None]
    A, *_ = np.linalg.lstsq(sw * Phi, sw * grid.cp, rcond=None)  # (M, n_aux)
    Wt, *_ = np.linalg.lstsq(Psi, A.T, rcond=None)  # (N, M)
    return Wt.T


# ------------------------------------------------------- episodic adjoint

@dataclass
class TurbineData:
    """Single-turbine view of an episode, ready for simulation.

    ``aux`` holds the Reynolds number (freestream) or the upstream
    tip-speed ratio (waked) per sample.
    """

    f_s: float
    u: np.ndarray
    R_v: np.ndarray
    aux: np.ndarray
    omega_star: np.ndarray
    omega0: float
    omega_true: np.ndarray = None

    @property
    def n_samples(self):
        return len(self.u)

    @property
    def duration(self):
        return (self.n_samples - 1) / self.f_s


def prepare_turbine_data(episode, turbine, params, aux_kind, config=IdentifyConfig(), upstream_params=None):
    """Extract and filter the series turbine ``turbine`` (0-based) needs.

    Measured ω* is zero-phase low-passed; with ``config.filter_inputs`` the
    wind and the upstream rotor speed are too, at ``input_cutoff``. For waked
    rotors the context is the upstream tip-speed ratio built from measured
    upstream speed and wind.
    """
    lp = lambda x, fc=config.filter_cutoff: butterworth_lowpass(x, episode.f_s, fc, config.filter_order, "zero_phase")
    omega_star = lp(episode.omegas_meas[:, turbine])
    fc_in = config.input_cutoff or config.filter_cutoff
    u = lp(episode.u1, fc_in) if config.filter_inputs else episode.u1.copy()
    if AuxKind(aux_kind) == AuxKind.REYNOLDS:
        aux = np.asarray(params.reynolds(u))
    else:
        if episode.omega_upstream is not None:
            up = episode.omega_upstream
        elif turbine > 0:
            up = episode.omegas_meas[:, turbine - 1]
        else:
            raise ValueError("a waked turbine needs an upstream rotor-speed series")
        if config.filter_inputs:
            up = lp(up, fc_in)
        aux = up * (upstream_params or params).R / u
    truth = None if episode.omegas_true is None else episode.omegas_true[:, turbine].copy()
    return TurbineData(episode.f_s, np.ascontiguousarray(u), np.ascontiguousarray(episode.R_vs[:, turbine]),
                       np.ascontiguousarray(aux), omega_star, float(omega_star[0]), truth)


def _trapezoid_weights(n, f_s):
    c = np.full(n, 1.0 / f_s)
    c[0] = c[-1] = 0.5 / f_s
    return c


def _kernel_args(model, data, params):
    psi = np.ascontiguousarray(psi_matrix(data.aux, model.config))
    W = np.ascontiguousarray(model.weights)
    centers = np.asarray(model.config.centers, dtype=float)
    return psi, W, centers, float(model.config.radius), params.pack()


def simulate_turbine(model, data, params, substeps=DEFAULT_SUBSTEPS):
    """Forward-simulate one rotor through an episode; ω at the sample instants."""
    psi, W, centers, radius, p = _kernel_args(model, data, params)
    ys, n_ok = _kernels.forward_single(max(data.omega0, OMEGA_FLOOR), data.u, data.R_v, psi, W, centers,
                                       radius, p, 1.0 / data.f_s, int(substeps))
    omega = ys[:: int(substeps)]
    if n_ok < data.n_samples - 1:
        raise ForwardBlowUp(f"forward simulation diverged in sample interval {n_ok}", n_ok,
                            _partial_cost(omega, data, n_ok))
    return omega


def _partial_cost(omega, data, n_ok):
    e = (data.omega_star - omega)[: n_ok + 1]
    c = _trapezoid_weights(n_ok + 1, data.f_s) if n_ok > 0 else np.zeros(1)
    return float(np.sum(c * e * e) / data.duration)


@dataclass
class AdjointWorkspace:
    omega_fwd: np.ndarray
    s_lambda: np.ndarray
    grad_w: np.ndarray
    cost: float


def episode_cost_and_grad(model, data, params, substeps=DEFAULT_SUBSTEPS):
    """Cost (1/T₀)∫(ω* − ω)² dt (trapezoidal on the sample grid) and its weight gradient."""
    psi, W, centers, radius, p = _kernel_args(model, data, params)
    dt = 1.0 / data.f_s
    S = int(substeps)
    ys, n_ok = _kernels.forward_single(max(data.omega0, OMEGA_FLOOR), data.u, data.R_v, psi, W, centers,
                                       radius, p, dt, S)
    omega = ys[::S]
    if n_ok < data.n_samples - 1:
        raise ForwardBlowUp(f"forward simulation diverged in sample interval {n_ok}", n_ok,
                            _partial_cost(omega, data, n_ok))
    T0 = data.duration
    c = _trapezoid_weights(data.n_samples, data.f_s)
    e = data.omega_star - omega
    cost = float(np.sum(c * e * e) / T0)
    direct = -2.0 * c * e / T0
    grad, s = _kernels.backward_single(ys, data.u, data.R_v, psi, W, centers, radius, p, dt, S, direct)
    return AdjointWorkspace(omega, s, grad, cost)


# ----------------------------------------------------------------- ADAM

class Adam:
    """ADAM with bias correction; ``reset`` clears both moments and the step counter."""

    def __init__(self, shape, config):
        self.config = config
        self.lr = config.eta_lr
        self.shape = shape
        self.reset()

    def reset(self):
        self.m = np.zeros(self.shape)
        self.v = np.zeros(self.shape)
        self.t = 0

    def step(self, w, grad):
        cfg = self.config
        self.t += 1
        self.m = cfg.beta1 * self.m + (1.0 - cfg.beta1) * grad
        self.v = cfg.beta2 * self.v + (1.0 - cfg.beta2) * grad * grad
        m_hat = self.m / (1.0 - cfg.beta1**self.t)
        v_hat = self.v / (1.0 - cfg.beta2**self.t)
        return w - self.lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


@dataclass
class AdamResult:
    weights: np.ndarray  # lowest-cost iterate
    last_weights: np.ndarray
    history: list  # cost per accepted iterate, history[0] at the initial weights
    lr_history: list
    restarts: list = field(default_factory=list)  # iterations at which moments were reset
    lr_drop_iter: int = None
    converged: bool = False
    optimizer: Adam = None

    @property
    def n_iters(self):
        return len(self.history) - 1


def adam_minimize(objective, w0, config, callback=None):
    """Minimise ``objective(w) -> (cost, grad)`` with restarts and a one-shot LR drop.

    A cost jump larger than ``restart_threshold`` between successive
    iterations resets the moments. A non-finite cost rejects the step and
    resets the moments; a second one in a row aborts. Once the cost falls
    below ``lr_drop_threshold`` the learning rate is divided by
    ``lr_drop_factor``, at most once. Iteration stops after ``max_iters`` or
    when the cost changes by less than ``rel_tol`` (relative) over
    ``tol_window`` iterations, or falls to ``cost_atol`` or below (which
    includes starting there).
    """
    w = np.array(w0, dtype=float)
    opt = Adam(w.shape, config)
    cost, grad = objective(w)
    if not np.isfinite(cost):
        raise IdentificationError(f"initial cost is not finite ({cost})")
    history, lr_history = [cost], [opt.lr]
    best_w, best_cost = w.copy(), cost
    res = AdamResult(best_w, w, history, lr_history, optimizer=opt)
    just_restarted = False
    if cost <= config.cost_atol:
        res.converged = True
        return res
    for it in range(1, config.max_iters + 1):
        w_new = opt.step(w, grad)
        try:
            cost_new, grad_new = objective(w_new)
        except ForwardBlowUp as exc:
            cost_new, grad_new = math.inf, None
            log.debug("iteration %d: %s (partial cost %.6g)", it, exc, exc.partial_cost)
        if not np.isfinite(cost_new) or grad_new is None or not np.all(np.isfinite(grad_new)):
            if just_restarted:
                raise IdentificationError(
                    f"non-finite cost at iteration {it} right after a restart; last finite cost {cost:.6g}, "
                    f"learning rate {opt.lr:.3g}, |w|max {np.abs(w).max():.3g}")
            opt.reset()
            res.restarts.append(it)
            just_restarted = True
            continue
        just_restarted = False
        if cost_new - cost > config.restart_threshold:
            opt.reset()
            res.restarts.append(it)
            just_restarted = True
        if res.lr_drop_iter is None and cost_new < config.lr_drop_threshold:
            opt.lr /= config.lr_drop_factor
            res.lr_drop_iter = it
        w, cost, grad = w_new, cost_new, grad_new
        history.append(cost)
        lr_history.append(opt.lr)
        if cost < best_cost:
            best_w, best_cost = w.copy(), cost
        if callback is not None:
            callback(it, w, cost)
        k = config.tol_window
        stalled = len(history) > k and (abs(history[-1] - history[-1 - k])
                                        <= config.rel_tol * abs(history[-1 - k]) + config.cost_atol)
        if stalled or cost <= config.cost_atol:
            res.converged = True
            break
    res.weights, res.last_weights = best_w, w
    return res


def total_cost_and_grad(model, datas, params, substeps=DEFAULT_SUBSTEPS):
    cost = 0.0
    grad = np.zeros(model.config.shape)
    for d in datas:
        ws = episode_cost_and_grad(model, d, params, substeps)
        cost += ws.cost
        grad += ws.grad_w
    return cost, grad


def adam_run(model, datas, params, config=IdentifyConfig(), callback=None):
    """Refine ``model`` on a list of :class:`TurbineData`; cost and gradient are summed over episodes."""
    if not datas:
        raise ValueError("adam_run needs at least one episode")
    objective = lambda w: total_cost_and_grad(model.with_weights(w), datas, params, config.substeps)
    return adam_minimize(objective, model.weights, config, callback)


# -------------------------------------------------------------- stability

@dataclass(frozen=True)
class StabilityViolation:
    lam: float
    aux: float
    dfdlam: float


def stability_derivative(model, params, lam, aux, law="constant_rv", u=None):
    """df/dλ at the steady state through (λ, aux) under a torque law.

    ``law``: "constant_rv" (τ_g ∝ λ at fixed load), "kw2" (τ_g ∝ λ²) or
    "constant_torque" (dτ_g/dλ = 0). Returns ``None`` when Cp ≤ 0, as no
    positive generator torque can balance the rotor there.
    """
    if model.config.aux_kind == AuxKind.REYNOLDS:
        u = aux * params.nu / params.D
    elif u is None:
        u = 8.0
    cp = cp_eval(model, lam, aux)
    if cp <= 0:
        return None
    k = 0.5 * params.rho * math.pi * params.R**3 * u**2
    tau_a = k * cp / lam
    dtau_g = {"constant_rv": tau_a / lam, "kw2": 2.0 * tau_a / lam, "constant_torque": 0.0}
    if law not in dtau_g:
        raise ValueError(f"unknown torque law {law!r}")
    d_cp_over_lam = cp_grad_lambda(model, lam, aux) / lam - cp / lam**2
    return (k * d_cp_over_lam - dtau_g[law]) / params.J


def stability_scan(model, params, lambda_grid, aux_grid, law="constant_rv", u=None):
    """List the grid points whose steady state is not asymptotically stable (df/dλ ≥ 0)."""
    out = []
    for lam in np.asarray(lambda_grid, dtype=float):
        for aux in np.asarray(aux_grid, dtype=float):
            d = stability_derivative(model, params, lam, aux, law, u)
            if d is not None and d >= 0:
                out.append(StabilityViolation(float(lam), float(aux), float(d)))
    return out


# ------------------------------------------------------------- pipeline

@dataclass
class TurbineFit:
    init_model: CpSurrogate
    model: CpSurrogate
    result: AdamResult
    initial_costs: list  # per training episode
    final_costs: list


def fit_turbine(samples, grid_shape, episodes, turbine, params, basis, config=IdentifyConfig(),
                upstream_params=None, callback=None):
    """WLS initialisation from steady samples followed by ADAM over the training episodes."""
    grid = steady_grid(samples, params, grid_shape)
    init = CpSurrogate(basis, wls_init(grid, basis))
    datas = [prepare_turbine_data(e, turbine, params, basis.aux_kind, config, upstream_params) for e in episodes]
    result = adam_run(init, datas, params, config, callback)
    model = init.with_weights(result.weights)
    per_ep = lambda m: [episode_cost_and_grad(m, d, params, config.substeps).cost for d in datas]
    return TurbineFit(init, model, result, per_ep(init), per_ep(model))
