import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from cpident.basis import BasisConfig, CpSurrogate
from cpident.data import (Episode, SteadySample, dumps_model, load_model, loads_model, read_episode_csv,
                          read_steady_csv, read_trajectory_csv, save_model, write_episode_csv,
                          write_steady_csv, write_trajectory_csv)
from cpident.dynamics import integrate
from cpident.signals import NoiseSpec
from cpident.twin import synth_episode, synth_steady_grid

finite = st.floats(-1e3, 1e3, allow_nan=False)


def test_episode_roundtrip(tmp_path, twin2):
    n = 101
    ep = synth_episode(twin2, np.linspace(7, 9, n), np.tile([3.0, 9.0], (n, 1)), NoiseSpec(0.01, 0.01, 0.01, seed=2))
    write_episode_csv(tmp_path / "e.csv", ep)
    back = read_episode_csv(tmp_path / "e.csv")
    for name in ("t", "u1", "omegas_meas", "R_vs", "sigma_omega", "u1_true", "omegas_true"):
        assert np.array_equal(getattr(back, name), getattr(ep, name)), name
    assert back.f_s == ep.f_s and back.omega_upstream is None


def test_episode_minimal_columns(tmp_path):
    (tmp_path / "m.csv").write_text("t,u1,omega_star_1,Rv_1\n0,8,200,6\n0.05,8,201,6\n")
    ep = read_episode_csv(tmp_path / "m.csv")
    assert ep.f_s == pytest.approx(20.0) and ep.n_turbines == 1
    (tmp_path / "bad.csv").write_text("t,u1,omega_star_1\n0,8,200\n0.05,8,201\n")
    with pytest.raises(ValueError):
        read_episode_csv(tmp_path / "bad.csv")


def test_episode_validation():
    with pytest.raises(ValueError):
        Episode(t=[0.0], u1=[8.0], omegas_meas=[[1.0]], R_vs=[[1.0]], sigma_omega=[1.0])
    with pytest.raises(ValueError):
        Episode(t=[0.0, 0.1], u1=[8.0, 8.0], omegas_meas=[[1.0], [1.0]], R_vs=[[1.0], [1.0]], sigma_omega=[1.0])
    ep = Episode(t=np.arange(10) / 20, u1=np.full(10, 8.0), omegas_meas=np.ones((10, 1)), R_vs=np.ones((10, 1)),
                 sigma_omega=[1.0])
    seg = ep.segment(3, 7)
    assert seg.n_samples == 4 and seg.t[0] == 0.0


def test_trajectory_roundtrip(tmp_path, twin2):
    traj = integrate(twin2, [200.0, 180.0], np.full(41, 8.0), [3.0, 9.0])
    write_trajectory_csv(tmp_path / "tr.csv", traj)
    back = read_trajectory_csv(tmp_path / "tr.csv")
    for name in ("t", "u1", "omegas", "R_vs", "cps", "lambdas"):
        assert np.array_equal(getattr(back, name), getattr(traj, name)), name


def test_steady_roundtrip(tmp_path, params, freestream_truth):
    samples = synth_steady_grid(freestream_truth, params, [4.0, 5.0, 6.0], [7e4, 8e4], NoiseSpec(0.01, 0.01, 0.01))
    write_steady_csv(tmp_path / "s.csv", samples, (3, 2))
    back, shape = read_steady_csv(tmp_path / "s.csv")
    assert shape == (3, 2) and back == samples


def test_steady_sample_validation():
    with pytest.raises(ValueError):
        SteadySample(0.0, 8.0, 1.0, 0.1, 0.1, 0.1, 8e4)
    with pytest.raises(ValueError):
        SteadySample(100.0, 8.0, 1.0, -0.1, 0.1, 0.1, 8e4)


@given(hnp.arrays(float, (5, 3), elements=finite), st.sampled_from(["reynolds", "upstream_tsr"]))
def test_model_text_roundtrip(w, kind):
    cfg = BasisConfig.freestream() if kind == "reynolds" else BasisConfig.waked(aux_scale=6.0)
    m = CpSurrogate(cfg, w)
    back = loads_model(dumps_model(m))
    assert back.config == m.config and np.array_equal(back.weights, m.weights)


def test_model_file_errors(tmp_path, freestream_truth):
    save_model(tmp_path / "m.txt", freestream_truth)
    assert np.array_equal(load_model(tmp_path / "m.txt").weights, freestream_truth.weights)
    with pytest.raises(ValueError):
        loads_model("something else\n")
    with pytest.raises(ValueError):
        loads_model(dumps_model(freestream_truth).replace("format_version 1", "format_version 9"))
