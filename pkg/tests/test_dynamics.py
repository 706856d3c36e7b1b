import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpident.basis import BasisConfig, CpSurrogate, cp_eval
from cpident.dynamics import (OMEGA_FLOOR, ArrayModel, ArrayState, IntegrationError, TurbineParams,
                              aero_torque, df_domega, gen_torque, integrate, rhs)
from cpident.twin import equilibrium_omegas, make_twin_array, steady_state_rv


def unit_params(**kw):
    base = dict(k_tau=1.0, k_omega=1.0, R_tot=1.0)
    base.update(kw)
    return TurbineParams(**base)


def constant_cp(value, kind="freestream"):
    cfg = BasisConfig.freestream(centers=(6.0,), radius=100.0, poly_orders=(0,)) if kind == "freestream" \
        else BasisConfig.waked(centers=(6.0,), radius=100.0, poly_orders=(0,))
    # a bump of radius 100 is ~flat near lambda = 6; exact constancy is not needed by the callers
    return CpSurrogate(cfg, [[value]])


def test_gen_torque_examples():
    p = unit_params()
    assert gen_torque(0.0, 1.0, p) == 0.0
    assert gen_torque(10.0, 1.0, p) == pytest.approx(5.0)
    assert gen_torque(10.0, 3.0, p) == pytest.approx(0.5 * gen_torque(10.0, 1.0, p))


def test_gen_torque_errors():
    with pytest.raises(ValueError):
        gen_torque(10.0, 0.0, unit_params(R_tot=0.0))
    with pytest.raises(ValueError):
        gen_torque(10.0, -1.0, unit_params())


def test_aero_torque_examples(params):
    assert aero_torque(400.0, 8.0, 0.4, params) == pytest.approx(0.5 * 1.2 * math.pi * 0.075**2 * 0.4 * 512 / 400)
    assert aero_torque(400.0, 8.0, 0.4, params) == pytest.approx(5.4287e-3, rel=1e-4)
    assert aero_torque(400.0, 8.0, 0.0, params) == 0.0
    assert aero_torque(400.0, 0.0, 0.4, params) == 0.0
    # below the floor the torque is evaluated at the floor
    assert aero_torque(0.0, 8.0, 0.4, params) == aero_torque(OMEGA_FLOOR, 8.0, 0.4, params)


def test_params_invariants():
    with pytest.raises(ValueError):
        TurbineParams(J=0.0)
    with pytest.raises(ValueError):
        TurbineParams(R_tot=-1.0)
    with pytest.raises(ValueError):
        TurbineParams(N_g=2.0)


def test_array_model_aux_kinds(freestream_truth, waked_truth, params):
    with pytest.raises(ValueError):
        ArrayModel(((params, waked_truth),))
    with pytest.raises(ValueError):
        ArrayModel(((params, freestream_truth), (params, freestream_truth)))
    assert len(ArrayModel(((params, freestream_truth), (params, waked_truth)))) == 2


def test_state_clamped():
    assert np.array_equal(ArrayState([-3.0, 2.0]).omegas, [0.0, 2.0])


@given(st.floats(3.6, 8.4), st.floats(6.0, 10.0))
def test_fixed_point_and_power_identity(lam, u):
    twin = make_twin_array(1)
    p, s = twin.turbines[0]
    aux = float(p.reynolds(u))
    R_v = steady_state_rv(s, p, lam, u, aux)
    if not R_v >= 0:
        return
    omega = lam * u / p.R
    f = rhs([omega], u, [R_v], twin)
    assert abs(f[0]) < 1e-9 * aero_torque(omega, u, cp_eval(s, lam, aux), p) / p.J
    cp_steady = 2 * gen_torque(omega, R_v, p) * omega / (p.rho * math.pi * p.R**2 * u**3)
    assert cp_steady == pytest.approx(cp_eval(s, lam, aux), rel=1e-10)


def test_two_turbine_rhs_matches_scalar_chain(twin2, params):
    omegas, u, R_vs = np.array([560.0, 480.0]), 8.2, [3.0, 9.0]
    f = rhs(omegas, u, R_vs, twin2)
    (p1, s1), (p2, s2) = twin2.turbines
    lam1, lam2 = omegas * params.R / u
    cp1 = cp_eval(s1, lam1, u * 0.15 / 1.5e-5)
    cp2 = cp_eval(s2, lam2, lam1)
    q = 0.5 * 1.2 * math.pi * 0.075**2 * u**3
    k2 = 5.85e-3**2
    assert f[0] == pytest.approx((q * cp1 / omegas[0] - k2 * omegas[0] / (2.5 + 3.0)) / 2.5e-6, rel=1e-12)
    assert f[1] == pytest.approx((q * cp2 / omegas[1] - k2 * omegas[1] / (2.5 + 9.0)) / 2.5e-6, rel=1e-12)


def test_single_turbine_reduces_to_scalar(params, freestream_truth):
    one = ArrayModel(((params, freestream_truth),))
    two = make_twin_array(2)
    assert rhs([500.0], 8.0, [4.0], one)[0] == rhs([500.0, 400.0], 8.0, [4.0, 9.0], two)[0]


@pytest.mark.parametrize("omegas", [[560.0, 480.0], [300.0, 650.0], [700.0, 300.0]])
def test_jacobian_matches_fd(twin2, omegas):
    omegas = np.array(omegas)
    u, R_vs = 8.3, [2.5, 7.0]
    diag, sub = df_domega(omegas, u, R_vs, twin2)
    assert sub[0] == 0.0
    for i in range(2):
        h = 1e-4 * omegas[i]
        e = np.zeros(2)
        e[i] = h
        fd = (rhs(omegas + e, u, R_vs, twin2) - rhs(omegas - e, u, R_vs, twin2)) / (2 * h)
        assert diag[i] == pytest.approx(fd[i], rel=1e-4)
        if i == 0:
            assert sub[1] == pytest.approx(fd[1], rel=1e-4, abs=1e-6 * abs(diag[1]))


def test_jacobian_constant_cp_closed_form(params):
    model = ArrayModel(((params, constant_cp(0.3)),))
    omega, u, R_v = 500.0, 8.0, 4.0
    cp = cp_eval(model.surrogates[0], omega * params.R / u, 1.0)
    diag, _ = df_domega([omega], u, [R_v], model)
    dcp = (cp_eval(model.surrogates[0], omega * params.R / u + 1e-6, 1.0) - cp_eval(model.surrogates[0], omega * params.R / u - 1e-6, 1.0)) / 2e-6
    q = 0.5 * params.rho * params.area * u**3
    expected = (-q * cp / omega**2 + q * dcp * params.R / u / omega
                - params.k_tau * params.k_omega / (params.R_tot + R_v)) / params.J
    assert diag[0] == pytest.approx(expected, rel=1e-6)


def test_zero_wind_decays_to_floor(twin2):
    traj = integrate(twin2, [500.0, 400.0], np.zeros(201), [[3.0, 8.0]])
    w = traj.omegas
    assert np.all(np.diff(w, axis=0) <= 0)
    assert np.all(w >= OMEGA_FLOOR)
    assert w[-1, 0] < 5.0


def test_equilibrium_is_preserved(twin2):
    u, R_vs = 8.0, [3.0, 9.0]
    w0 = equilibrium_omegas(twin2, u, R_vs, settle=40.0)
    traj = integrate(twin2, w0, np.full(401, u), [R_vs])
    assert np.allclose(traj.omegas, w0, rtol=1e-10, atol=0)


def _terminal(twin, substeps, f_s=20.0):
    n = 61
    t = np.arange(n) / f_s
    u = 8.0 + 0.5 * np.sin(0.4 * t)
    return integrate(twin, [300.0, 250.0], u, [[3.0, 8.0]], f_s=f_s, substeps=substeps).omegas[-1]


def test_rk4_order(twin2):
    ref = _terminal(twin2, 256, f_s=5.0)
    errs = [np.abs(_terminal(twin2, s, f_s=5.0) - ref).max() for s in (8, 16)]
    order = math.log2(errs[0] / errs[1])
    assert 3.8 <= order <= 4.2


def test_step_refinement(twin2):
    a, b = _terminal(twin2, 10), _terminal(twin2, 20)
    assert np.all(np.abs(a - b) / b < 1e-6)


def test_kernel_matches_numpy_rk4(twin2):
    n, f_s, S = 41, 20.0, 10
    u = np.linspace(7.0, 9.0, n)
    R_vs = np.column_stack([np.linspace(2.0, 6.0, n), np.full(n, 9.0)])
    traj = integrate(twin2, [450.0, 380.0], u, R_vs, f_s, S)
    y = np.array([450.0, 380.0])
    h = 1.0 / (f_s * S)
    for k in range(n - 1):
        f = lambda w: rhs(np.maximum(w, OMEGA_FLOOR), u[k], R_vs[k], twin2)
        for _ in range(S):
            k1 = f(y)
            k2 = f(y + 0.5 * h * k1)
            k3 = f(y + 0.5 * h * k2)
            k4 = f(y + h * k3)
            y = np.maximum(y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), OMEGA_FLOOR)
    assert np.allclose(traj.omegas[-1], y, rtol=1e-12)


def test_blow_up_reports_step(params):
    cfg = BasisConfig.freestream()
    model = ArrayModel(((params, CpSurrogate(cfg, np.full((5, 3), 1e308))),))
    with pytest.raises(IntegrationError) as info:
        integrate(model, [400.0], np.full(11, 8.0), [[2.0]])
    assert 0 <= info.value.step < 10


def test_integrate_validates_inputs(twin2):
    with pytest.raises(ValueError):
        integrate(twin2, [400.0, 300.0], np.full(11, 8.0), [[-1.0, 2.0]])
    with pytest.raises(ValueError):
        integrate(twin2, [400.0, 300.0], np.full(11, 8.0), [[1.0, 2.0]], substeps=0)


def test_trajectory_annotations(twin2, params):
    traj = integrate(twin2, [450.0, 380.0], np.full(21, 8.0), [[3.0, 9.0]])
    assert np.allclose(traj.lambdas, traj.omegas * params.R / 8.0)
    s1, s2 = twin2.surrogates
    assert traj.cps[5, 1] == pytest.approx(cp_eval(s2, traj.lambdas[5, 1], traj.lambdas[5, 0]))


def test_wake_response_to_upstream_tsr(twin2):
    """Pushing the upstream rotor past its optimum leaves more energy in the wake.

    The waked truth map rises as the upstream rotor moves away from its
    optimum, so at fixed downstream load the waked rotor speeds up.
    """
    w2 = [equilibrium_omegas(twin2, 8.0, [R1, 9.0], settle=30.0)[1] for R1 in (3.0, 6.0, 12.0)]
    lam1 = [equilibrium_omegas(twin2, 8.0, [R1, 9.0], settle=30.0)[0] * 0.075 / 8.0 for R1 in (3.0, 6.0, 12.0)]
    assert lam1[0] > 5.1 and lam1[0] < lam1[1] < lam1[2]
    assert w2[0] < w2[1] < w2[2]
