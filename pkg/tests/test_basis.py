import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cpident.basis import (AuxKind, BasisConfig, CpSurrogate, cp_eval, cp_grad_aux, cp_grad_lambda,
                           cp_grad_weights, phi_matrix, psi_matrix, rbf_eval)

CFG = BasisConfig.freestream()
finite = st.floats(-50, 50, allow_nan=False)


def double_sum(W, cfg, lam, aux):
    total = 0.0
    for m, c in enumerate(cfg.centers):
        d = lam - c
        phi = (1 - d * d / cfg.radius**2) ** 5 if abs(d) <= cfg.radius else 0.0
        for n, k in enumerate(cfg.poly_orders):
            total += W[m, n] * phi * (aux / cfg.aux_scale) ** k
    return total


def test_rbf_examples():
    assert rbf_eval(5.0, 5.0, 1.5) == 1.0
    assert rbf_eval(7.0, 5.0, 1.5) == 0.0
    assert rbf_eval(5.0 + 1.5 / math.sqrt(2), 5.0, 1.5) == pytest.approx(0.03125, rel=1e-12)


@pytest.mark.parametrize("bad", [math.nan, math.inf, -math.inf])
def test_rbf_rejects_non_finite(bad):
    with pytest.raises(ValueError):
        rbf_eval(bad, 5.0, 1.5)


def test_rbf_rejects_bad_radius():
    with pytest.raises(ValueError):
        rbf_eval(5.0, 5.0, 0.0)


@given(finite, finite, st.floats(0.01, 10))
def test_rbf_in_unit_interval(lam, c, r):
    assert 0.0 <= rbf_eval(lam, c, r) <= 1.0


def test_phi_matrix_examples():
    P = phi_matrix([4, 5, 6, 7, 8], CFG)
    assert P.shape == (5, 5)
    assert np.allclose(np.diag(P), 1.0)
    assert phi_matrix([], CFG).shape == (0, 5)
    row = phi_matrix([6.0], CFG)[0]
    assert np.array_equal(row, [rbf_eval(6.0, c, 1.5) for c in CFG.centers])


def test_psi_matrix_examples():
    assert np.array_equal(psi_matrix([0.0], CFG)[0], [1, 0, 0])
    assert np.allclose(psi_matrix([CFG.aux_scale], CFG)[0], [1, 1, 1])
    assert np.allclose(psi_matrix([2 * CFG.aux_scale], CFG)[0], [1, 2, 4])


@pytest.mark.parametrize("kw", [dict(centers=(5.0, 4.0)), dict(radius=0.0), dict(poly_orders=(1, 0)),
                                dict(poly_orders=(-1, 0)), dict(aux_scale=0.0), dict(centers=())])
def test_config_invariants(kw):
    with pytest.raises(ValueError):
        BasisConfig(**kw)


def test_config_defaults():
    assert CFG.centers == (4.0, 5.0, 6.0, 7.0, 8.0)
    assert CFG.radius == 1.5
    assert CFG.poly_orders == (0, 1, 2)
    assert BasisConfig.waked().aux_kind == AuxKind.UPSTREAM_TSR
    assert BasisConfig.waked().aux_scale == 1.0


def test_surrogate_validates_weights():
    with pytest.raises(ValueError):
        CpSurrogate(CFG, np.zeros((4, 3)))
    with pytest.raises(ValueError):
        CpSurrogate(CFG, np.full((5, 3), np.nan))
    m = CpSurrogate.zeros(CFG)
    with pytest.raises(ValueError):
        m.weights[0, 0] = 1.0


def test_cp_eval_examples(rng):
    assert cp_eval(CpSurrogate.zeros(CFG), 5.3, 7e4) == 0.0
    for m, c in enumerate(CFG.centers):
        W = np.zeros((5, 3))
        W[m, 0] = 1.0
        assert cp_eval(CpSurrogate(CFG, W), c, 1.234e5) == pytest.approx(1.0, abs=1e-15)
    W = rng.normal(size=(5, 3))
    assert cp_eval(CpSurrogate(CFG, W), 5.3, 8e4) == pytest.approx(double_sum(W, CFG, 5.3, 8e4), rel=1e-13)


def test_cp_eval_rejects_non_finite():
    with pytest.raises(ValueError):
        cp_eval(CpSurrogate.zeros(CFG), math.nan, 8e4)


def test_cp_eval_broadcasts(rng):
    m = CpSurrogate(CFG, rng.normal(size=(5, 3)))
    lam = np.linspace(3, 9, 7)
    out = m(lam, 8e4)
    assert out.shape == (7,)
    assert np.allclose(out, [cp_eval(m, x, 8e4) for x in lam], rtol=1e-14, atol=1e-15)


@given(st.floats(-20, 20), st.floats(1e3, 2e5))
def test_compact_support(lam, aux):
    W = np.random.default_rng(0).normal(size=(5, 3)) * 100
    lo, hi = CFG.support
    if lam < lo or lam > hi:
        assert cp_eval(CpSurrogate(CFG, W), lam, aux) == 0.0


@given(st.floats(2, 10), st.floats(3e4, 1.5e5), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity(lam, aux, a, b):
    r = np.random.default_rng(1)
    W1, W2 = r.normal(size=(5, 3)), r.normal(size=(5, 3))
    lhs = cp_eval(CpSurrogate(CFG, a * W1 + b * W2), lam, aux)
    rhs = a * cp_eval(CpSurrogate(CFG, W1), lam, aux) + b * cp_eval(CpSurrogate(CFG, W2), lam, aux)
    assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


def test_grad_weights(rng):
    W = rng.normal(size=(5, 3))
    m = CpSurrogate(CFG, W)
    G = cp_grad_weights(m, 5.7, 9e4)
    assert np.sum(G * W) == pytest.approx(cp_eval(m, 5.7, 9e4), rel=1e-13)
    assert not cp_grad_weights(m, 1.0, 9e4).any()
    h = 1e-6
    for i in range(5):
        for j in range(3):
            Wp, Wm = W.copy(), W.copy()
            Wp[i, j] += h
            Wm[i, j] -= h
            fd = (cp_eval(m.with_weights(Wp), 5.7, 9e4) - cp_eval(m.with_weights(Wm), 5.7, 9e4)) / (2 * h)
            assert fd == pytest.approx(G[i, j], rel=1e-6, abs=1e-10)


def test_grad_weights_single_center():
    cfg = BasisConfig(centers=(6.0,))
    G = cp_grad_weights(CpSurrogate(cfg, np.ones((1, 3))), 6.4, 1.6e5)
    assert np.allclose(G[0], rbf_eval(6.4, 6.0, 1.5) * psi_matrix([1.6e5], cfg)[0])


def test_grad_lambda_examples(rng):
    m = CpSurrogate(CFG, np.eye(5, 3) + 0.0)
    single = CpSurrogate(BasisConfig(centers=(6.0,)), np.array([[1.0, 0.0, 0.0]]))
    assert cp_grad_lambda(single, 6.0, 8e4) == 0.0
    assert cp_grad_lambda(single, 7.5, 8e4) == 0.0
    assert cp_grad_lambda(m, 2.0, 8e4) == 0.0


@given(st.floats(2.0, 10.0), st.floats(4e4, 1.2e5))
def test_grad_lambda_matches_fd(lam, aux):
    m = CpSurrogate(CFG, np.random.default_rng(2).normal(size=(5, 3)))
    h = 1e-5
    fd = (cp_eval(m, lam + h, aux) - cp_eval(m, lam - h, aux)) / (2 * h)
    an = cp_grad_lambda(m, lam, aux)
    # the bump is C^4, so the central-difference error is O(h^2) everywhere
    assert abs(fd - an) <= 1e-5 * max(abs(an), 1.0)


def test_grad_aux_matches_fd(rng):
    m = CpSurrogate(CFG, rng.normal(size=(5, 3)))
    h = 1.0
    fd = (cp_eval(m, 5.4, 7e4 + h) - cp_eval(m, 5.4, 7e4 - h)) / (2 * h)
    assert cp_grad_aux(m, 5.4, 7e4) == pytest.approx(fd, rel=1e-7)


@given(st.lists(st.floats(0, 12), min_size=1, max_size=8))
def test_matrix_rows_match_scalar(lams):
    P = phi_matrix(lams, CFG)
    for j, lam in enumerate(lams):
        assert list(P[j]) == [rbf_eval(lam, c, CFG.radius) for c in CFG.centers]
