"""Episode and steady-state sample containers and their plain-text file formats.

All numbers are written with 17 significant digits so every file round-trips
bit-exactly through the readers here.
"""
from __future__ import annotations

import io
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import AuxKind, BasisConfig, CpSurrogate

MODEL_MAGIC = "cpident-surrogate"
MODEL_FORMAT_VERSION = 1


def fmt(x):
    return format(float(x), ".17g")


@dataclass
class Episode:
    """Uniformly sampled record of one observation window.

    ``omegas_meas`` and ``R_vs`` are (n, K) for K turbines. ``u1_true`` and
    ``omegas_true`` are only present for synthetic episodes and are used for
    evaluation, never for identification.
    """

    t: np.ndarray
    u1: np.ndarray
    omegas_meas: np.ndarray
    R_vs: np.ndarray
    sigma_omega: np.ndarray
    f_s: float = 20.0
    u1_true: np.ndarray = None
    omegas_true: np.ndarray = None
    omega_upstream: np.ndarray = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.u1 = np.asarray(self.u1, dtype=float)
        self.omegas_meas = np.asarray(self.omegas_meas, dtype=float).reshape(len(self.t), -1)
        self.R_vs = np.asarray(self.R_vs, dtype=float).reshape(len(self.t), -1)
        self.sigma_omega = np.atleast_1d(np.asarray(self.sigma_omega, dtype=float))
        n = len(self.t)
        if n < 2:
            raise ValueError("an episode needs at least two samples")
        if self.u1.shape != (n,) or self.omegas_meas.shape[0] != n or self.R_vs.shape != self.omegas_meas.shape:
            raise ValueError("episode series must all have the same length")
        if self.sigma_omega.shape != (self.omegas_meas.shape[1],):
            raise ValueError("need one sigma_omega per turbine")
        if not np.allclose(np.diff(self.t), 1.0 / self.f_s, rtol=1e-9, atol=1e-12):
            raise ValueError(f"time vector is not uniformly spaced at 1/f_s = {1.0 / self.f_s}")
        for name in ("u1_true", "omegas_true", "omega_upstream"):
            value = getattr(self, name)
            if value is not None:
                value = np.asarray(value, dtype=float)
                if name == "omegas_true":
                    value = value.reshape(self.omegas_meas.shape)
                if value.shape[0] != n:
                    raise ValueError(f"{name} length does not match the episode")
                setattr(self, name, value)

    @property
    def n_samples(self):
        return len(self.t)

    @property
    def n_turbines(self):
        return self.omegas_meas.shape[1]

    @property
    def duration(self):
        return self.t[-1] - self.t[0]

    def segment(self, start, stop):
        """Sub-episode over sample indices [start, stop)."""
        sl = slice(start, stop)
        pick = lambda a: None if a is None else a[sl]
        return Episode(
            t=self.t[sl] - self.t[start], u1=self.u1[sl], omegas_meas=self.omegas_meas[sl],
            R_vs=self.R_vs[sl], sigma_omega=self.sigma_omega, f_s=self.f_s,
            u1_true=pick(self.u1_true), omegas_true=pick(self.omegas_true),
            omega_upstream=pick(self.omega_upstream),
        )


@dataclass(frozen=True)
class SteadySample:
    omega: float
    u1: float
    R_v: float
    sigma_omega: float
    sigma_u: float
    sigma_tau: float
    aux: float

    def __post_init__(self):
        if not (self.omega > 0 and self.u1 > 0):
            raise ValueError("steady samples need positive omega and u1")
        if min(self.sigma_omega, self.sigma_u, self.sigma_tau) < 0:
            raise ValueError("standard deviations must be non-negative")
        if self.R_v < 0:
            raise ValueError("load resistance must be non-negative")


# ---------------------------------------------------------------- CSV helpers

def _write_table(path, header, columns, meta=None):
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}={value}\n")
    buf.write(",".join(header) + "\n")
    for row in zip(*columns):
        buf.write(",".join(fmt(v) for v in row) + "\n")
    Path(path).write_text(buf.getvalue())


def _read_table(path):
    meta = {}
    header = None
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        elif header is None:
            header = [h.strip() for h in line.split(",")]
        else:
            rows.append([float(v) for v in line.split(",")])
    if header is None:
        raise ValueError(f"{path}: missing header line")
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return header, data, meta


def _indexed_columns(header, data, prefix):
    pat = re.compile(rf"^{re.escape(prefix)}_(\d+)$")
    found = sorted((int(m.group(1)), j) for j, h in enumerate(header) if (m := pat.match(h)))
    if not found:
        return None, []
    return data[:, [j for _, j in found]], [i for i, _ in found]


def write_episode_csv(path, episode):
    K = episode.n_turbines
    header = ["t", "u1"] + [f"omega_star_{i + 1}" for i in range(K)] + [f"Rv_{i + 1}" for i in range(K)]
    cols = [episode.t, episode.u1] + list(episode.omegas_meas.T) + list(episode.R_vs.T)
    if episode.omega_upstream is not None:
        header.append("omega_upstream")
        cols.append(episode.omega_upstream)
    if episode.u1_true is not None:
        header.append("u1_true")
        cols.append(episode.u1_true)
    if episode.omegas_true is not None:
        header += [f"omega_true_{i + 1}" for i in range(K)]
        cols += list(episode.omegas_true.T)
    meta = {"f_s": fmt(episode.f_s), "sigma_omega": ";".join(fmt(s) for s in episode.sigma_omega)}
    _write_table(path, header, cols, meta)


def read_episode_csv(path):
    header, data, meta = _read_table(path)
    col = {h: j for j, h in enumerate(header)}
    for required in ("t", "u1"):
        if required not in col:
            raise ValueError(f"{path}: missing column {required!r}")
    omegas, ids = _indexed_columns(header, data, "omega_star")
    R_vs, rv_ids = _indexed_columns(header, data, "Rv")
    if omegas is None or ids != rv_ids:
        raise ValueError(f"{path}: need matching omega_star_i and Rv_i columns")
    t = data[:, col["t"]]
    if "f_s" in meta:
        f_s = float(meta["f_s"])
    else:
        f_s = 1.0 / float(np.mean(np.diff(t)))
    if "sigma_omega" in meta:
        sigma = np.array([float(s) for s in meta["sigma_omega"].split(";")])
    else:
        sigma = np.ones(omegas.shape[1])
    omegas_true, _ = _indexed_columns(header, data, "omega_true")
    return Episode(
        t=t, u1=data[:, col["u1"]], omegas_meas=omegas, R_vs=R_vs, sigma_omega=sigma, f_s=f_s,
        u1_true=data[:, col["u1_true"]] if "u1_true" in col else None,
        omegas_true=omegas_true,
        omega_upstream=data[:, col["omega_upstream"]] if "omega_upstream" in col else None,
    )


def write_trajectory_csv(path, traj):
    K = traj.n_turbines
    header = (["t", "u1"] + [f"omega_{i + 1}" for i in range(K)] + [f"Rv_{i + 1}" for i in range(K)]
              + [f"cp_{i + 1}" for i in range(K)] + [f"lambda_{i + 1}" for i in range(K)])
    cols = ([traj.t, traj.u1] + list(traj.omegas.T) + list(traj.R_vs.T)
            + list(traj.cps.T) + list(traj.lambdas.T))
    _write_table(path, header, cols)


def read_trajectory_csv(path):
    from .dynamics import Trajectory

    header, data, _ = _read_table(path)
    col = {h: j for j, h in enumerate(header)}
    get = lambda prefix: _indexed_columns(header, data, prefix)[0]
    return Trajectory(t=data[:, col["t"]], u1=data[:, col["u1"]], omegas=get("omega"),
                      R_vs=get("Rv"), cps=get("cp"), lambdas=get("lambda"))


STEADY_HEADER = ["omega", "u1", "R_v", "sigma_omega", "sigma_u", "sigma_tau", "aux"]


def write_steady_csv(path, samples, grid_shape):
    cols = [[getattr(s, h) for s in samples] for h in STEADY_HEADER]
    _write_table(path, STEADY_HEADER, cols, {"grid": f"{grid_shape[0]}x{grid_shape[1]}"})


def read_steady_csv(path):
    header, data, meta = _read_table(path)
    if header != STEADY_HEADER:
        raise ValueError(f"{path}: expected header {','.join(STEADY_HEADER)}")
    samples = [SteadySample(*row) for row in data]
    if "grid" not in meta:
        raise ValueError(f"{path}: missing '# grid=NxM' line")
    n_lam, n_aux = (int(v) for v in meta["grid"].split("x"))
    return samples, (n_lam, n_aux)


def write_simple_csv(path, header, columns, meta=None):
    _write_table(path, header, columns, meta)


def read_simple_csv(path):
    header, data, meta = _read_table(path)
    return {h: data[:, j] for j, h in enumerate(header)}


# ------------------------------------------------------------- model files

def dumps_model(model):
    cfg = model.config
    lines = [
        MODEL_MAGIC,
        f"format_version {MODEL_FORMAT_VERSION}",
        f"aux_kind {cfg.aux_kind.value}",
        f"aux_scale {fmt(cfg.aux_scale)}",
        f"radius {fmt(cfg.radius)}",
        "centers " + " ".join(fmt(c) for c in cfg.centers),
        "poly_orders " + " ".join(str(n) for n in cfg.poly_orders),
        f"weights {cfg.n_rbf} {cfg.n_poly}",
    ]
    lines += [" ".join(fmt(w) for w in row) for row in model.weights]
    return "\n".join(lines) + "\n"


def loads_model(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or lines[0] != MODEL_MAGIC:
        raise ValueError("not a surrogate model file")
    fields = {}
    i = 1
    while i < len(lines):
        key, _, rest = lines[i].partition(" ")
        i += 1
        if key == "weights":
            M, N = (int(v) for v in rest.split())
            rows = [[float(v) for v in lines[i + r].split()] for r in range(M)]
            fields["weights"] = np.array(rows).reshape(M, N)
            i += M
        else:
            fields[key] = rest
    version = int(fields.get("format_version", -1))
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")
    cfg = BasisConfig(
        centers=tuple(float(c) for c in fields["centers"].split()),
        radius=float(fields["radius"]),
        poly_orders=tuple(int(n) for n in fields["poly_orders"].split()),
        aux_kind=AuxKind(fields["aux_kind"]),
        aux_scale=float(fields["aux_scale"]),
    )
    return CpSurrogate(cfg, fields["weights"])


def save_model(path, model):
    Path(path).write_text(dumps_model(model))


def load_model(path):
    return loads_model(Path(path).read_text())
