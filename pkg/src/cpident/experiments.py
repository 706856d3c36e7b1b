"""Twin experiments shared by the scripts in ``scripts/`` and the acceptance tests.

Each function runs one study end to end on the synthetic twin and returns
plain dictionaries of results so callers can print, assert or dump them.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisConfig, CpSurrogate, cp_eval
from .control import FixedLoad, Kw2Controller, Setpoints, closed_loop
from .dynamics import TurbineParams
from .evaluate import compare_series
from .identify import (IdentifyConfig, adam_run, prepare_turbine_data, simulate_turbine, steady_grid,
                       wls_init)
from .signals import NoiseSpec
from .twin import (SuiteConfig, clean_turbine_data, make_suite, make_twin_array, make_twin_truth, steady_state_rv,
                   synth_steady_grid)

STEADY_LAMBDAS = np.linspace(4.0, 8.0, 9)
STEADY_RE = np.linspace(6.5, 9.5, 5) * 1e4
STEADY_UP_TSR = np.linspace(4.0, 8.0, 5)


@dataclass(frozen=True)
class StudyConfig:
    """Identification settings used by the twin studies."""

    identify: IdentifyConfig = IdentifyConfig(eta_lr=0.003, max_iters=300, input_cutoff=0.5)
    waked_aux_scale: float = 6.0
    steady_noise: NoiseSpec = NoiseSpec(seed=1)
    suite: SuiteConfig = field(default_factory=SuiteConfig)


def basis_for(turbine, aux_scale=6.0):
    return BasisConfig.freestream() if turbine == 0 else BasisConfig.waked(aux_scale=aux_scale)


def truth_for(turbine):
    return make_twin_truth("freestream" if turbine == 0 else "waked")


def steady_init(turbine, params, noise, aux_scale=6.0):
    """WLS initial model of one turbine from a synthetic steady-state grid."""
    aux = STEADY_RE if turbine == 0 else STEADY_UP_TSR
    samples = synth_steady_grid(truth_for(turbine), params, STEADY_LAMBDAS, aux, noise)
    basis = basis_for(turbine, aux_scale)
    return CpSurrogate(basis, wls_init(steady_grid(samples, params, (len(STEADY_LAMBDAS), len(aux))), basis))


def visited_cp_error(model, truth, episodes, turbine, params):
    """Max and mean relative Cp error over the (λ, aux) points the test episodes visit."""
    lam, aux = [], []
    for e in episodes:
        u = e.u1_true
        lam.append(e.omegas_true[:, turbine] * params.R / u)
        aux.append(params.reynolds(u) if turbine == 0 else e.omegas_true[:, turbine - 1] * params.R / u)
    lam, aux = np.concatenate(lam), np.concatenate(aux)
    ref = cp_eval(truth, lam, aux)
    rel = np.abs(cp_eval(model, lam, aux) - ref) / np.abs(ref)
    return float(rel.max()), float(rel.mean()), (float(lam.min()), float(lam.max())), (float(aux.min()), float(aux.max()))


def identify_turbine(turbine, train, test, params, study, callback=None):
    """WLS init then ADAM; test-split RMSE per episode before and after, on noisy and clean inputs."""
    cfg = study.identify
    t0 = time.perf_counter()
    init = steady_init(turbine, params, study.steady_noise, study.waked_aux_scale)
    kind = init.config.aux_kind
    datas = [prepare_turbine_data(e, turbine, params, kind, cfg) for e in train]
    result = adam_run(init, datas, params, cfg, callback)
    model = init.with_weights(result.weights)
    runtime = time.perf_counter() - t0
    rows = []
    for e in test:
        noisy = prepare_turbine_data(e, turbine, params, kind, cfg)
        clean = clean_turbine_data(e, turbine, params)
        row = {}
        for label, d, ref in (("noisy", noisy, e.omegas_true[:, turbine]), ("clean", clean, clean.omega_star)):
            for name, m in (("init", init), ("final", model)):
                row[f"{label}_{name}"] = compare_series(simulate_turbine(m, d, params, cfg.substeps), ref)["rmse"]
            row[f"{label}_ratio"] = row[f"{label}_final"] / row[f"{label}_init"]
        rows.append(row)
    truth = truth_for(turbine)
    return {
        "init": init,
        "model": model,
        "result": result,
        "runtime": runtime,
        "test": rows,
        "cp_error_init": visited_cp_error(init, truth, test, turbine, params)[0],
        "cp_error": visited_cp_error(model, truth, test, turbine, params),
    }


def low_turbulence_study(study=StudyConfig(), params=None, turbines=(0, 1)):
    """Identification on the two-turbine ramped-wind suite (7 training, 4 test episodes)."""
    params = params or TurbineParams()
    train, test = make_suite(study.suite, make_twin_array(study.suite.n_turbines, params))
    return {i: identify_turbine(i, train, test, params, study) for i in turbines}


HIGH_TURBULENCE_SUITE = SuiteConfig(kind="high_turbulence", n_turbines=3, n_train=24, n_test=6, duration=20.0,
                                    correlation=0.2)


def high_turbulence_study(suite=HIGH_TURBULENCE_SUITE, identify=IdentifyConfig(eta_lr=0.003, max_iters=300),
                          params=None, aux_scale=6.0):
    """Identification from decorrelated wind; pooled test-split statistics of ω per turbine."""
    params = params or TurbineParams()
    train, test = make_suite(suite, make_twin_array(suite.n_turbines, params))
    out = {}
    for i in range(suite.n_turbines):
        t0 = time.perf_counter()
        init = steady_init(i, params, NoiseSpec(seed=1), aux_scale)
        kind = init.config.aux_kind
        datas = [prepare_turbine_data(e, i, params, kind, identify) for e in train]
        result = adam_run(init, datas, params, identify)
        model = init.with_weights(result.weights)
        dte = [prepare_turbine_data(e, i, params, kind, identify) for e in test]
        meas = np.concatenate([d.omega_star for d in dte])
        stats = {}
        for name, m in (("init", init), ("final", model), ("truth", truth_for(i))):
            sim = np.concatenate([simulate_turbine(m, d, params, identify.substeps) for d in dte])
            stats[name] = compare_series(sim, meas)
        out[i] = {"model": model, "result": result, "stats": stats, "runtime": time.perf_counter() - t0}
    return out


# ------------------------------------------------------------------ control

UPSTREAM_SCHEDULE = Setpoints(((0.0, 5.0), (20.0, 6.5), (40.0, 4.5)))
DOWNSTREAM_SCHEDULE = Setpoints(((0.0, 5.5), (30.0, 4.8)))


def tracking(controller_models, params=None, u=8.0, duration=60.0, f_s=20.0, settle=5.0,
             schedules=(UPSTREAM_SCHEDULE, DOWNSTREAM_SCHEDULE)):
    """Closed-loop tracking of per-turbine setpoint schedules under constant wind."""
    params = params or TurbineParams()
    twin = make_twin_array(len(controller_models), params)
    ctrls = [Kw2Controller(m, params, sp.knots[0][1], f_s=f_s) for m, sp in zip(controller_models, schedules)]
    n = int(round(duration * f_s)) + 1
    return closed_loop(twin, ctrls, list(schedules), np.full(n, u), f_s, settle=settle)


def wake_step(downstream, params=None, u=8.0, lam_up=(5.0, 7.0), t_step=20.0, duration=60.0, f_s=20.0,
              lam_down=5.5):
    """Upstream λ_ref step with the downstream rotor either Kω²-controlled or at a fixed load.

    ``downstream`` is "kw2" or "fixed". The fixed load is the one that holds
    ``lam_down`` before the step. Returns the downstream λ series and time.
    """
    params = params or TurbineParams()
    twin = make_twin_array(2, params)
    up = Kw2Controller(make_twin_truth("freestream"), params, lam_up[0], f_s=f_s)
    sp_up = Setpoints(((0.0, lam_up[0]), (t_step, lam_up[1])))
    if downstream == "kw2":
        down, sp_down = Kw2Controller(make_twin_truth("waked"), params, lam_down, f_s=f_s), Setpoints(((0.0, lam_down),))
    else:
        omega_up = lam_up[0] * u / params.R
        R_v = steady_state_rv(make_twin_truth("waked"), params, lam_down, u, omega_up * params.R / u)
        down, sp_down = FixedLoad(float(R_v), lam_down), None
    n = int(round(duration * f_s)) + 1
    res = closed_loop(twin, [up, down], [sp_up, sp_down], np.full(n, u), f_s, omega0=None)
    return res.trajectory.t, res.trajectory.lambdas[:, 1], res


def upstream_tracking(model, params=None, u=8.0, duration=60.0, f_s=20.0, settle=5.0, schedule=UPSTREAM_SCHEDULE,
                      downstream_rv=8.4):
    """Kω² tracking of the upstream rotor with the waked rotor left at a fixed load."""
    params = params or TurbineParams()
    twin = make_twin_array(2, params)
    ctrls = [Kw2Controller(model, params, schedule.knots[0][1], f_s=f_s), FixedLoad(downstream_rv)]
    n = int(round(duration * f_s)) + 1
    return closed_loop(twin, ctrls, [schedule, None], np.full(n, u), f_s, settle=settle)
