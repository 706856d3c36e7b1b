"""Tensor-product power-coefficient surrogates.

A surrogate evaluates

    Cp(lam, aux) = sum_m sum_n W[m, n] * phi_m(lam) * psi_n(aux)

where ``phi_m`` are compactly supported bumps ``(1 - d**2 / c**2)**5`` centred
on tip-speed ratios and ``psi_n`` are monomials of the scaled auxiliary
variable (Reynolds number for the freestream rotor, upstream tip-speed ratio
for waked rotors).
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

RBF_EXPONENT = 5
DEFAULT_CENTERS = (4.0, 5.0, 6.0, 7.0, 8.0)
DEFAULT_RADIUS = 1.5
DEFAULT_POLY_ORDERS = (0, 1, 2)
# mid-range Re of the rig (u ~ 8 m/s, D = 0.15 m, nu = 1.5e-5)
DEFAULT_RE_SCALE = 8.0e4


class AuxKind(str, enum.Enum):
    REYNOLDS = "reynolds"
    UPSTREAM_TSR = "upstream_tsr"


def _check_finite(name, value):
    arr = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite, got {value!r}")
    return arr


@dataclass(frozen=True)
class BasisConfig:
    centers: tuple = DEFAULT_CENTERS
    radius: float = DEFAULT_RADIUS
    poly_orders: tuple = DEFAULT_POLY_ORDERS
    aux_kind: AuxKind = AuxKind.REYNOLDS
    aux_scale: float = DEFAULT_RE_SCALE

    def __post_init__(self):
        centers = tuple(float(c) for c in self.centers)
        orders = tuple(int(n) for n in self.poly_orders)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "poly_orders", orders)
        object.__setattr__(self, "radius", float(self.radius))
        object.__setattr__(self, "aux_scale", float(self.aux_scale))
        object.__setattr__(self, "aux_kind", AuxKind(self.aux_kind))
        if not centers:
            raise ValueError("at least one RBF center is required")
        _check_finite("centers", centers)
        if any(b <= a for a, b in zip(centers, centers[1:])):
            raise ValueError(f"centers must be strictly increasing: {centers}")
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise ValueError(f"radius must be positive, got {self.radius}")
        if not orders:
            raise ValueError("at least one polynomial order is required")
        if orders[0] < 0 or any(b <= a for a, b in zip(orders, orders[1:])):
            raise ValueError(f"poly_orders must be non-negative and strictly increasing: {orders}")
        if not (self.aux_scale > 0 and math.isfinite(self.aux_scale)):
            raise ValueError(f"aux_scale must be positive, got {self.aux_scale}")

    @classmethod
    def freestream(cls, **kw):
        kw.setdefault("aux_kind", AuxKind.REYNOLDS)
        kw.setdefault("aux_scale", DEFAULT_RE_SCALE)
        return cls(**kw)

    @classmethod
    def waked(cls, **kw):
        kw.setdefault("aux_kind", AuxKind.UPSTREAM_TSR)
        kw.setdefault("aux_scale", 1.0)
        return cls(**kw)

    @property
    def n_rbf(self):
        return len(self.centers)

    @property
    def n_poly(self):
        return len(self.poly_orders)

    @property
    def shape(self):
        return (self.n_rbf, self.n_poly)

    @property
    def support(self):
        """Closed interval of tip-speed ratios where at least one RBF is non-zero."""
        return (self.centers[0] - self.radius, self.centers[-1] + self.radius)


@dataclass(frozen=True)
class CpSurrogate:
    config: BasisConfig
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.shape != self.config.shape:
            raise ValueError(f"weights shape {w.shape} does not match basis {self.config.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def zeros(cls, config):
        return cls(config, np.zeros(config.shape))

    def with_weights(self, weights):
        return CpSurrogate(self.config, weights)

    def scaled(self, factor):
        return CpSurrogate(self.config, factor * self.weights)

    def __call__(self, lam, aux):
        return cp_eval(self, lam, aux)


def rbf_eval(lam, center, radius):
    """Compact bump ``(1 - d**2/c**2)**5`` for ``|d| <= c``, exactly zero outside."""
    _check_finite("lambda", lam)
    _check_finite("center", center)
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    d = np.array([float(lam) - float(center)])
    return float(_bump(d, float(radius))[0])


def _bump(d, radius):
    r = 1.0 - d * d / (radius * radius)
    return np.where(np.abs(d) <= radius, r**RBF_EXPONENT, 0.0)


def phi_matrix(lambdas, config):
    lam = _check_finite("lambdas", np.atleast_1d(np.asarray(lambdas, dtype=float)))
    d = lam[:, None] - np.asarray(config.centers)[None, :]
    return _bump(d, float(config.radius))


def dphi_matrix(lambdas, config):
    """Derivative of :func:`phi_matrix` with respect to the tip-speed ratio."""
    lam = _check_finite("lambdas", np.atleast_1d(np.asarray(lambdas, dtype=float)))
    d = lam[:, None] - np.asarray(config.centers)[None, :]
    c2 = config.radius**2
    r = 1.0 - d * d / c2
    return np.where(np.abs(d) <= config.radius, -2.0 * RBF_EXPONENT * d / c2 * r ** (RBF_EXPONENT - 1), 0.0)


def psi_matrix(aux_values, config):
    aux = _check_finite("aux_values", np.atleast_1d(np.asarray(aux_values, dtype=float)))
    x = aux / config.aux_scale
    return x[:, None] ** np.asarray(config.poly_orders, dtype=float)[None, :]


def _paired(lam, aux):
    scalar = np.ndim(lam) == 0 and np.ndim(aux) == 0
    lam, aux = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(aux, dtype=float))
    return lam.ravel(), aux.ravel(), scalar, lam.shape


def cp_eval(model, lam, aux):
    """Evaluate Cp at paired (lam, aux) points; scalars in, float out."""
    lam, aux, scalar, shape = _paired(lam, aux)
    phi = phi_matrix(lam, model.config)
    psi = psi_matrix(aux, model.config)
    out = np.einsum("jm,mn,jn->j", phi, model.weights, psi)
    return float(out[0]) if scalar else out.reshape(shape)


def cp_grad_weights(model, lam, aux):
    """dCp/dW at a single point: the outer product phi(lam) psi(aux)^T."""
    phi = phi_matrix(lam, model.config)[0]
    psi = psi_matrix(aux, model.config)[0]
    return np.outer(phi, psi)


def cp_grad_lambda(model, lam, aux):
    lam, aux, scalar, shape = _paired(lam, aux)
    dphi = dphi_matrix(lam, model.config)
    psi = psi_matrix(aux, model.config)
    out = np.einsum("jm,mn,jn->j", dphi, model.weights, psi)
    return float(out[0]) if scalar else out.reshape(shape)


def cp_grad_aux(model, lam, aux):
    """dCp/d(aux) at a single point (the auxiliary variable in its raw units)."""
    cfg = model.config
    x = float(aux) / cfg.aux_scale
    orders = np.asarray(cfg.poly_orders, dtype=float)
    dpsi = np.where(orders > 0, orders * x ** np.maximum(orders - 1, 0), 0.0) / cfg.aux_scale
    return float(phi_matrix(lam, cfg)[0] @ model.weights @ dpsi)
