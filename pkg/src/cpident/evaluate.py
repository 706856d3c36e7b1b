"""Comparison statistics between predicted and measured rotor-speed series."""
from __future__ import annotations

import math

import numpy as np


def compare_series(predicted, measured, t_pred=None, t_meas=None):
    """RMSE, mean error, relative mean error and std ratio of two aligned series."""
    p = np.asarray(predicted, dtype=float)
    m = np.asarray(measured, dtype=float)
    if p.shape != m.shape:
        raise ValueError(f"series lengths differ ({p.shape} vs {m.shape})")
    if p.size == 0:
        raise ValueError("empty series")
    if t_pred is not None and t_meas is not None:
        tp, tm = np.asarray(t_pred, dtype=float), np.asarray(t_meas, dtype=float)
        if tp.shape != tm.shape or not np.allclose(tp, tm, rtol=0, atol=1e-9):
            raise ValueError("predicted and measured series are on different time bases")
    err = p - m
    std_m = m.std()
    return {
        "rmse": float(np.sqrt(np.mean(err**2))),
        "mean_error": float(err.mean()),
        "rel_mean_error": float(p.mean() / m.mean() - 1.0) if m.mean() != 0 else math.nan,
        "std_ratio": float(p.std() / std_m) if std_m > 0 else (1.0 if p.std() == 0 else math.inf),
        "mean_measured": float(m.mean()),
        "mean_predicted": float(p.mean()),
        "std_measured": float(std_m),
        "std_predicted": float(p.std()),
    }


def histograms(predicted, measured, bins=30):
    """Shared-edge density histograms for plotting the two distributions."""
    p = np.asarray(predicted, dtype=float)
    m = np.asarray(measured, dtype=float)
    lo, hi = min(p.min(), m.min()), max(p.max(), m.max())
    if hi == lo:
        hi = lo + 1.0
    edges = np.linspace(lo, hi, bins + 1)
    hp, _ = np.histogram(p, edges, density=True)
    hm, _ = np.histogram(m, edges, density=True)
    return edges, hp, hm
