"""Compiled inner loops for the rotor ODE.

Everything here works on plain arrays so numba can compile it. Turbine
constants travel as a packed float vector, see ``dynamics.TurbineParams.pack``:

    [J, R, rho, nu, k_tau, k_omega, R_tot, omega_floor]

Inputs (wind speed, load resistance, auxiliary polynomial row) are held
constant over each sample interval; each interval is split into ``substeps``
classical RK4 steps and the state is clamped at ``omega_floor`` after every step.
"""
import math

import numpy as np
from numba import njit

P_J, P_R, P_RHO, P_NU, P_KTAU, P_KOMEGA, P_RTOT, P_FLOOR = range(8)
AUX_REYNOLDS, AUX_UPSTREAM = 0, 1


@njit(cache=True)
def _basis_row(lam, centers, radius, phi, dphi):
    c2 = radius * radius
    for m in range(centers.shape[0]):
        d = lam - centers[m]
        if abs(d) <= radius:
            r = 1.0 - d * d / c2
            r4 = r * r * r * r
            phi[m] = r4 * r
            dphi[m] = -10.0 * d / c2 * r4
        else:
            phi[m] = 0.0
            dphi[m] = 0.0


@njit(cache=True)
def _rhs_single(y, u, rv, wpsi, centers, radius, p, phi, dphi):
    """Return (f, df/dy, aero_w) with phi/dphi filled at lambda = y R / u.

    ``aero_w`` is the factor multiplying phi_m psi_n in df/dW.
    """
    J = p[P_J]
    R = p[P_R]
    floor = p[P_FLOOR]
    g = p[P_KTAU] * p[P_KOMEGA] / (p[P_RTOT] + rv)
    yf = y if y > floor else floor
    if u > 0.0:
        lam = y * R / u
        q = 0.5 * p[P_RHO] * math.pi * R * R * u * u * u
    else:
        lam = 0.0
        q = 0.0
    _basis_row(lam, centers, radius, phi, dphi)
    cp = 0.0
    dcp = 0.0
    for m in range(centers.shape[0]):
        cp += phi[m] * wpsi[m]
        dcp += dphi[m] * wpsi[m]
    f = (q * cp / yf - g * y) / J
    fy = -g
    if u > 0.0:
        fy += q * dcp * (R / u) / yf
    if y > floor:
        fy -= q * cp / (yf * yf)
    return f, fy / J, q / (J * yf)


@njit(cache=True)
def _wpsi(W, psi_row, out):
    for m in range(W.shape[0]):
        acc = 0.0
        for j in range(W.shape[1]):
            acc += W[m, j] * psi_row[j]
        out[m] = acc


@njit(cache=True)
def forward_single(omega0, u, rv, psi, W, centers, radius, p, dt, substeps):
    """Integrate one rotor over all sample intervals.

    Returns ``(ys, n_ok)``: the state at every substep boundary, length
    ``(n-1)*substeps + 1``, and the number of sample intervals completed
    before a non-finite state appeared.
    """
    n = u.shape[0]
    M = centers.shape[0]
    S = substeps
    h = dt / S
    floor = p[P_FLOOR]
    ys = np.full((n - 1) * S + 1, np.nan)
    ys[0] = omega0
    phi = np.empty(M)
    dphi = np.empty(M)
    wpsi = np.empty(M)
    y = omega0
    for k in range(n - 1):
        _wpsi(W, psi[k], wpsi)
        uk = u[k]
        rk = rv[k]
        for s in range(S):
            k1, _, _ = _rhs_single(y, uk, rk, wpsi, centers, radius, p, phi, dphi)
            k2, _, _ = _rhs_single(y + 0.5 * h * k1, uk, rk, wpsi, centers, radius, p, phi, dphi)
            k3, _, _ = _rhs_single(y + 0.5 * h * k2, uk, rk, wpsi, centers, radius, p, phi, dphi)
            k4, _, _ = _rhs_single(y + h * k3, uk, rk, wpsi, centers, radius, p, phi, dphi)
            y = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if not math.isfinite(y):
                return ys, k
            if y < floor:
                y = floor
            ys[k * S + s + 1] = y
    return ys, n - 1


@njit(cache=True)
def backward_single(ys, u, rv, psi, W, centers, radius, p, dt, substeps, direct):
    """Discrete adjoint of :func:`forward_single`.

    ``direct[k]`` is the explicit derivative of the cost with respect to the
    sampled state k. Returns ``(grad, s)`` with ``grad`` the exact derivative
    of the cost with respect to ``W`` and ``s[k]`` the sensitivity of the cost
    accrued strictly after sample k to the state at sample k (so ``s[-1] = 0``).
    """
    n = u.shape[0]
    M = centers.shape[0]
    N = psi.shape[1]
    S = substeps
    h = dt / S
    floor = p[P_FLOOR]
    grad = np.zeros((M, N))
    s_out = np.zeros(n)
    phi = np.empty(M)
    dphi = np.empty(M)
    wpsi = np.empty(M)
    acc = np.empty(M)
    abar = 0.0
    for k in range(n - 1, 0, -1):
        abar += direct[k]
        iv = k - 1
        _wpsi(W, psi[iv], wpsi)
        uk = u[iv]
        rk = rv[iv]
        for m in range(M):
            acc[m] = 0.0
        for s in range(S - 1, -1, -1):
            y = ys[iv * S + s]
            y1 = y
            k1, fy1, aw1 = _rhs_single(y1, uk, rk, wpsi, centers, radius, p, phi, dphi)
            y2 = y + 0.5 * h * k1
            k2, fy2, aw2 = _rhs_single(y2, uk, rk, wpsi, centers, radius, p, phi, dphi)
            y3 = y + 0.5 * h * k2
            k3, fy3, aw3 = _rhs_single(y3, uk, rk, wpsi, centers, radius, p, phi, dphi)
            y4 = y + h * k3
            k4, fy4, aw4 = _rhs_single(y4, uk, rk, wpsi, centers, radius, p, phi, dphi)
            y_raw = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if y_raw < floor:
                abar = 0.0
                continue
            kb1 = abar * h / 6.0
            kb2 = abar * h / 3.0
            kb3 = abar * h / 3.0
            kb4 = abar * h / 6.0
            ybar = abar
            # stage 4
            _basis_row(y4 * p[P_R] / uk if uk > 0.0 else 0.0, centers, radius, phi, dphi)
            for m in range(M):
                acc[m] += kb4 * aw4 * phi[m]
            yb = kb4 * fy4
            ybar += yb
            kb3 += h * yb
            # stage 3
            _basis_row(y3 * p[P_R] / uk if uk > 0.0 else 0.0, centers, radius, phi, dphi)
            for m in range(M):
                acc[m] += kb3 * aw3 * phi[m]
            yb = kb3 * fy3
            ybar += yb
            kb2 += 0.5 * h * yb
            # stage 2
            _basis_row(y2 * p[P_R] / uk if uk > 0.0 else 0.0, centers, radius, phi, dphi)
            for m in range(M):
                acc[m] += kb2 * aw2 * phi[m]
            yb = kb2 * fy2
            ybar += yb
            kb1 += 0.5 * h * yb
            # stage 1
            _basis_row(y1 * p[P_R] / uk if uk > 0.0 else 0.0, centers, radius, phi, dphi)
            for m in range(M):
                acc[m] += kb1 * aw1 * phi[m]
            ybar += kb1 * fy1
            abar = ybar
        for m in range(M):
            for j in range(N):
                grad[m, j] += acc[m] * psi[iv, j]
        s_out[iv] = abar
    return grad, s_out


@njit(cache=True)
def _array_rhs(y, u, rv, W, centers, n_centers, radius, orders, n_orders, aux_kind, aux_scale, P, out):
    K = y.shape[0]
    upstream_lam = 0.0
    for i in range(K):
        p = P[i]
        R = p[P_R]
        floor = p[P_FLOOR]
        yf = y[i] if y[i] > floor else floor
        if u > 0.0:
            lam = y[i] * R / u
            q = 0.5 * p[P_RHO] * math.pi * R * R * u * u * u
        else:
            lam = 0.0
            q = 0.0
        if aux_kind[i] == AUX_REYNOLDS:
            aux = u * 2.0 * R / p[P_NU]
        else:
            aux = upstream_lam
        x = aux / aux_scale[i]
        c2 = radius[i] * radius[i]
        cp = 0.0
        for m in range(n_centers[i]):
            d = lam - centers[i, m]
            if abs(d) <= radius[i]:
                r = 1.0 - d * d / c2
                b = r * r * r * r * r
                for j in range(n_orders[i]):
                    cp += W[i, m, j] * b * x ** orders[i, j]
        g = p[P_KTAU] * p[P_KOMEGA] / (p[P_RTOT] + rv[i])
        out[i] = (q * cp / yf - g * y[i]) / p[P_J]
        upstream_lam = lam


@njit(cache=True)
def forward_array(omega0, u, rv, W, centers, n_centers, radius, orders, n_orders, aux_kind, aux_scale, P, dt, substeps):
    """Integrate a chain of rotors; turbine i>0 sees the tip-speed ratio of i-1.

    Returns ``(omegas, n_ok)`` with ``omegas`` of shape (n, K) at sample instants.
    """
    n = u.shape[0]
    K = omega0.shape[0]
    S = substeps
    h = dt / S
    out = np.full((n, K), np.nan)
    y = omega0.copy()
    out[0] = y
    k1 = np.empty(K)
    k2 = np.empty(K)
    k3 = np.empty(K)
    k4 = np.empty(K)
    tmp = np.empty(K)
    for k in range(n - 1):
        uk = u[k]
        rk = rv[k]
        for s in range(S):
            _array_rhs(y, uk, rk, W, centers, n_centers, radius, orders, n_orders, aux_kind, aux_scale, P, k1)
            for i in range(K):
                tmp[i] = y[i] + 0.5 * h * k1[i]
            _array_rhs(tmp, uk, rk, W, centers, n_centers, radius, orders, n_orders, aux_kind, aux_scale, P, k2)
            for i in range(K):
                tmp[i] = y[i] + 0.5 * h * k2[i]
            _array_rhs(tmp, uk, rk, W, centers, n_centers, radius, orders, n_orders, aux_kind, aux_scale, P, k3)
            for i in range(K):
                tmp[i] = y[i] + h * k3[i]
            _array_rhs(tmp, uk, rk, W, centers, n_centers, radius, orders, n_orders, aux_kind, aux_scale, P, k4)
            for i in range(K):
                yi = y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                if not math.isfinite(yi):
                    return out, k
                floor = P[i, P_FLOOR]
                y[i] = yi if yi > floor else floor
        out[k + 1] = y
    return out, n - 1
