"""Command-line front end: ``cpident {simulate,identify,control,eval,stability}``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as C
from .basis import AuxKind
from .control import FixedLoad, Kw2Controller, Setpoints, closed_loop
from .data import (load_model, read_episode_csv, read_simple_csv, read_steady_csv, save_model,
                   write_episode_csv, write_simple_csv, write_steady_csv, write_trajectory_csv)
from .dynamics import IntegrationError, Trajectory, annotate
from .evaluate import compare_series, histograms
from .identify import (IdentificationError, episode_cost_and_grad, fit_turbine, prepare_turbine_data,
                       simulate_turbine, stability_derivative)
from .signals import WindKind, WindScenario, gen_wind
from .twin import make_suite, make_twin_array, make_twin_truth, synth_steady_grid

log = logging.getLogger("cpident")

EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n")


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _plot_script(path, body):
    Path(path).write_text(
        "# Plot helper; reads only files written next to it. Requires matplotlib.\n"
        "import csv\nfrom pathlib import Path\n\nimport matplotlib.pyplot as plt\n\n"
        "HERE = Path(__file__).parent\n\n\n"
        "def load(name):\n"
        "    rows = [r for r in (HERE / name).read_text().splitlines() if r and not r.startswith('#')]\n"
        "    header = rows[0].split(',')\n"
        "    cols = list(zip(*[[float(v) for v in r.split(',')] for r in rows[1:]]))\n"
        "    return dict(zip(header, cols))\n\n\n" + body
    )


# ---------------------------------------------------------------- simulate

def cmd_simulate(args):
    cfg, base = args.cfg, args.base
    if "scenario" not in cfg:
        raise C.ConfigError("scenario: section is required")
    scen = dict(cfg["scenario"])
    if args.seed is not None:
        scen["seed"] = args.seed
    suite = C.suite_config(scen)
    params = C.turbine_params(base, cfg.get("params"))
    twin = make_twin_array(suite.n_turbines, params)
    train, test = make_suite(suite, twin)
    out = _out_dir(args)
    (out / "episodes").mkdir(exist_ok=True)
    (out / "trajectories").mkdir(exist_ok=True)
    files = {"train": [], "test": []}
    for split, eps in (("train", train), ("test", test)):
        for k, ep in enumerate(eps):
            name = f"{split}_{k:03d}.csv"
            write_episode_csv(out / "episodes" / name, ep)
            traj = annotate(Trajectory(ep.t, ep.u1_true, ep.omegas_true, ep.R_vs), twin)
            write_trajectory_csv(out / "trajectories" / name, traj)
            files[split].append(f"episodes/{name}")
    steady_files = {}
    if "steady" in cfg:
        st = cfg["steady"] or {}
        lambdas = C.grid(st.get("lambda", [4.0, 8.0, 9]), "steady.lambda")
        noise = C.noise_spec(st.get("noise", {"seed": suite.seed}), "steady.noise")
        aux_specs = st.get("aux") or {}
        if not aux_specs:
            raise C.ConfigError("steady.aux: give an aux grid for at least one turbine")
        for key, spec in sorted(aux_specs.items(), key=lambda kv: int(kv[0])):
            i = int(key)
            if not 1 <= i <= suite.n_turbines:
                raise C.ConfigError(f"steady.aux.{key}: turbine index out of range")
            truth = twin.surrogates[i - 1]
            aux = C.grid(spec, f"steady.aux.{key}")
            try:
                samples = synth_steady_grid(truth, params, lambdas, aux, noise, float(st.get("u_waked", 8.0)))
            except ValueError as exc:
                raise C.ConfigError(f"steady: {exc}") from exc
            name = f"steady_turbine_{i}.csv"
            write_steady_csv(out / name, samples, (len(lambdas), len(aux)))
            steady_files[str(i)] = name
    write_json(out / "manifest.json", {"train": files["train"], "test": files["test"], "steady": steady_files,
                                       "n_samples": int(train[0].n_samples), "f_s": suite.f_s,
                                       "seed": suite.seed, "kind": suite.kind})
    _plot_script(out / "plot_episodes.py",
                 "for name in sorted((HERE / 'episodes').glob('*.csv')):\n"
                 "    d = load(f'episodes/{name.name}')\n"
                 "    fig, ax = plt.subplots(3, 1, sharex=True)\n"
                 "    ax[0].plot(d['t'], d['u1'])\n"
                 "    for k in [k for k in d if k.startswith('omega_star_')]:\n"
                 "        ax[1].plot(d['t'], d[k], label=k)\n"
                 "    for k in [k for k in d if k.startswith('Rv_')]:\n"
                 "        ax[2].plot(d['t'], d[k], label=k)\n"
                 "    ax[1].legend(); ax[2].legend(); fig.savefig(HERE / (name.stem + '.png'))\n")
    print(f"wrote {len(train)} training and {len(test)} test episodes to {out}")
    return 0


# ---------------------------------------------------------------- identify

def _episodes(base, spec, where):
    paths = C.expand_paths(base, spec, where)
    return paths, [read_episode_csv(p) for p in paths]


def cmd_identify(args):
    cfg, base = args.cfg, args.base
    turbine = int(cfg.get("turbine", 1))
    if turbine < 1:
        raise C.ConfigError("turbine: indices start at 1")
    params = C.turbine_params(base, cfg.get("params"))
    up_params = C.turbine_params(base, cfg["upstream_params"], "upstream_params") if "upstream_params" in cfg else None
    default_kind = AuxKind.REYNOLDS if turbine == 1 else AuxKind.UPSTREAM_TSR
    basis = C.basis_config(cfg.get("basis"), default_kind)
    id_spec = dict(cfg.get("identify") or {})
    if args.max_iters is not None:
        id_spec["max_iters"] = args.max_iters
    id_cfg = C.identify_config(id_spec)
    steady_path = C.resolve(base, cfg.get("steady"), "steady")
    if not steady_path.is_file():
        raise C.ConfigError(f"steady: file not found: {steady_path}")
    samples, shape = read_steady_csv(steady_path)
    if "train" not in cfg:
        raise C.ConfigError("train: list of training episode files is required")
    train_paths, train = _episodes(base, cfg["train"], "train")
    if not train:
        raise C.ConfigError("train: no episodes given")
    test_paths, test = _episodes(base, cfg.get("test", []), "test")
    for p, e in zip(train_paths + test_paths, train + test):
        if e.n_turbines < turbine:
            raise C.ConfigError(f"{p}: episode has {e.n_turbines} turbine(s), turbine {turbine} requested")
    fit = fit_turbine(samples, shape, train, turbine - 1, params, basis, id_cfg, up_params)
    out = _out_dir(args)
    save_model(out / "model_init.txt", fit.init_model)
    save_model(out / "model_final.txt", fit.model)
    res = fit.result
    restart_set = set(res.restarts)
    write_simple_csv(out / "cost_history.csv", ["iteration", "cost", "lr", "restart"],
                     [np.arange(len(res.history)), res.history, res.lr_history,
                      [1.0 if i in restart_set else 0.0 for i in range(len(res.history))]])
    test_report = []
    for p, e in zip(test_paths, test):
        d = prepare_turbine_data(e, turbine - 1, params, basis.aux_kind, id_cfg, up_params)
        row = {"file": str(p.name)}
        for label, m in (("init", fit.init_model), ("final", fit.model)):
            row[f"{label}_cost"] = episode_cost_and_grad(m, d, params, id_cfg.substeps).cost
            row[f"{label}_rmse"] = compare_series(simulate_turbine(m, d, params, id_cfg.substeps), d.omega_star)["rmse"]
        test_report.append(row)
    report = {
        "turbine": turbine,
        "aux_kind": basis.aux_kind.value,
        "identify_config": {k: getattr(id_cfg, k) for k in id_cfg.__dataclass_fields__},
        "episode_gradients": "summed",
        "n_iters": res.n_iters,
        "converged": res.converged,
        "restarts": res.restarts,
        "lr_drop_iter": res.lr_drop_iter,
        "initial_cost": res.history[0],
        "final_cost": min(res.history),
        "train": [{"file": p.name, "initial_cost": a, "final_cost": b}
                  for p, a, b in zip(train_paths, fit.initial_costs, fit.final_costs)],
        "test": test_report,
        "model_init": "model_init.txt",
        "model_final": "model_final.txt",
        "cost_history": "cost_history.csv",
    }
    write_json(out / "report.json", report)
    _plot_script(out / "plot_cost.py",
                 "d = load('cost_history.csv')\nplt.semilogy(d['iteration'], d['cost'])\n"
                 "plt.xlabel('iteration'); plt.ylabel('cost')\nplt.savefig(HERE / 'cost_history.png')\n")
    print(f"turbine {turbine}: cost {res.history[0]:.6g} -> {min(res.history):.6g} in {res.n_iters} iterations")
    return 0


# ----------------------------------------------------------------- control

CONTROLLER_MODELS = ("truth", "identified", "init", "biased-baseline", "file")


def _controller_model(base, spec, i, where):
    source = spec.get("model", "truth")
    if source not in CONTROLLER_MODELS:
        raise C.ConfigError(f"{where}.model: expected one of {', '.join(CONTROLLER_MODELS)}")
    if source in ("identified", "init", "file"):
        path = C.resolve(base, spec.get("path"), f"{where}.path")
        if not path.is_file():
            raise C.ConfigError(f"{where}.path: model file not found: {path}")
        model = load_model(path)
    else:
        model = make_twin_truth("freestream" if i == 0 else "waked")
    bias = float(spec.get("bias", 1.3 if source == "biased-baseline" else 1.0))
    want = AuxKind.REYNOLDS if i == 0 else AuxKind.UPSTREAM_TSR
    if model.config.aux_kind != want:
        raise C.ConfigError(f"{where}: turbine {i + 1} needs a {want.value} model")
    return model.scaled(bias) if bias != 1.0 else model


def _wind(cfg, n_duration, f_s, seed):
    spec = dict(cfg.get("wind") or {"schedule": [[0.0, 8.0]]})
    kind = spec.pop("kind", "low_turbulence")
    if "schedule" in spec:
        spec["schedule"] = tuple(tuple(float(x) for x in k) for k in spec["schedule"])
    spec.setdefault("seed", seed)
    scen = C.build(WindScenario, {"kind": WindKind(kind), **spec}, "wind")
    return gen_wind(scen, n_duration, f_s)


def cmd_control(args):
    cfg, base = args.cfg, args.base
    params = C.turbine_params(base, cfg.get("params"))
    duration = float(cfg.get("duration", 60.0))
    f_s = float(cfg.get("f_s", 20.0))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    specs = cfg.get("turbines")
    if not specs:
        raise C.ConfigError("turbines: at least one turbine entry is required")
    twin = make_twin_array(len(specs), params)
    controllers, setpoints = [], []
    for i, spec in enumerate(specs):
        where = f"turbines[{i}]"
        kind = spec.get("controller", "kw2")
        if kind == "fixed":
            if "R_v" not in spec:
                raise C.ConfigError(f"{where}.R_v: required for a fixed load")
            controllers.append(FixedLoad(float(spec["R_v"]), spec.get("lambda_ref")))
            setpoints.append(None)
        elif kind == "kw2":
            model = _controller_model(base, spec, i, where)
            try:
                sp = Setpoints(spec.get("setpoints") or ())
                ctl = Kw2Controller(model, params, sp.knots[0][1], f_s=f_s,
                                    cutoff=float(spec.get("cutoff", 2.0)))
                for _, v in sp.knots:
                    ctl.check_reference(v)
            except ValueError as exc:
                raise C.ConfigError(f"{where}.setpoints: {exc}") from exc
            controllers.append(ctl)
            setpoints.append(sp)
        else:
            raise C.ConfigError(f"{where}.controller: expected 'kw2' or 'fixed'")
    noise = C.noise_spec({**cfg["noise"], "seed": seed}, "noise") if cfg.get("noise") else None
    u1 = _wind(cfg, duration, f_s, seed)
    res = closed_loop(twin, controllers, setpoints, u1, f_s, settle=float(cfg.get("settle", 5.0)), noise=noise)
    out = _out_dir(args)
    write_trajectory_csv(out / "trajectory.csv", res.trajectory)
    K = len(twin)
    write_simple_csv(out / "references.csv", ["t"] + [f"lambda_ref_{i + 1}" for i in range(K)],
                     [res.trajectory.t] + list(np.nan_to_num(res.lambda_refs, nan=-1.0).T))
    write_json(out / "metrics.json", {
        "turbines": [{"turbine": i + 1, "controller": specs[i].get("controller", "kw2"),
                      "model": specs[i].get("model", "truth") if specs[i].get("controller", "kw2") == "kw2" else None,
                      **res.metrics[i], "segments": res.segments[i]} for i in range(K)],
        "settle": float(cfg.get("settle", 5.0)),
    })
    _plot_script(out / "plot_control.py",
                 "d = load('trajectory.csv')\nr = load('references.csv')\n"
                 "n = len([k for k in d if k.startswith('lambda_')])\n"
                 "fig, ax = plt.subplots(n, 1, sharex=True, squeeze=False)\n"
                 "for i in range(n):\n"
                 "    ax[i][0].plot(d['t'], d[f'lambda_{i + 1}'])\n"
                 "    ref = [v if v >= 0 else float('nan') for v in r[f'lambda_ref_{i + 1}']]\n"
                 "    ax[i][0].plot(r['t'], ref, 'r--')\n"
                 "fig.savefig(HERE / 'control.png')\n")
    for m in res.metrics:
        log.info("tracking %s", m)
    print("tracking rms: " + ", ".join(f"{m['rms_error']:.4g}" for m in res.metrics))
    return 0


# -------------------------------------------------------------------- eval

def cmd_eval(args):
    cfg, base = args.cfg, args.base
    out = _out_dir(args)
    bins = int(cfg.get("bins", 30))
    if "series" in cfg:
        s = cfg["series"]
        col = s.get("column", "omega")
        pred = read_simple_csv(C.resolve(base, s.get("predicted"), "series.predicted"))
        meas = read_simple_csv(C.resolve(base, s.get("measured"), "series.measured"))
        for name, d in (("predicted", pred), ("measured", meas)):
            if col not in d:
                raise C.ConfigError(f"series.{name}: no column {col!r}")
        stats = compare_series(pred[col], meas[col], pred.get("t"), meas.get("t"))
        p_all, m_all, per = pred[col], meas[col], []
    else:
        turbine = int(cfg.get("turbine", 1))
        params = C.turbine_params(base, cfg.get("params"))
        up_params = C.turbine_params(base, cfg["upstream_params"], "upstream_params") if "upstream_params" in cfg else None
        model_path = C.resolve(base, cfg.get("model"), "model")
        if not model_path.is_file():
            raise C.ConfigError(f"model: file not found: {model_path}")
        model = load_model(model_path)
        id_cfg = C.identify_config(cfg.get("identify"))
        reference = cfg.get("reference", "measured")
        if reference not in ("measured", "filtered", "truth"):
            raise C.ConfigError("reference: expected measured, filtered or truth")
        paths, eps = _episodes(base, cfg.get("episodes"), "episodes")
        if not eps:
            raise C.ConfigError("episodes: no episodes given")
        preds, meass, per = [], [], []
        for p, e in zip(paths, eps):
            d = prepare_turbine_data(e, turbine - 1, params, model.config.aux_kind, id_cfg, up_params)
            pred = simulate_turbine(model, d, params, id_cfg.substeps)
            if reference == "measured":
                meas = e.omegas_meas[:, turbine - 1]
            elif reference == "filtered":
                meas = d.omega_star
            else:
                if e.omegas_true is None:
                    raise C.ConfigError(f"{p}: no true series for reference=truth")
                meas = e.omegas_true[:, turbine - 1]
            per.append({"file": p.name, **compare_series(pred, meas)})
            preds.append(pred)
            meass.append(meas)
        p_all, m_all = np.concatenate(preds), np.concatenate(meass)
        stats = compare_series(p_all, m_all)
        write_simple_csv(out / "eval_series.csv", ["index", "predicted", "measured"],
                         [np.arange(len(p_all)), p_all, m_all])
    edges, hp, hm = histograms(p_all, m_all, bins)
    write_simple_csv(out / "histogram.csv", ["edge_lo", "edge_hi", "density_predicted", "density_measured"],
                     [edges[:-1], edges[1:], hp, hm])
    write_json(out / "eval_report.json", {"pooled": stats, "episodes": per})
    _plot_script(out / "plot_eval.py",
                 "h = load('histogram.csv')\n"
                 "mid = [(a + b) / 2 for a, b in zip(h['edge_lo'], h['edge_hi'])]\n"
                 "plt.plot(mid, h['density_measured'], 'k', label='measured')\n"
                 "plt.plot(mid, h['density_predicted'], 'r', label='model')\n"
                 "plt.legend(); plt.savefig(HERE / 'pdf.png')\n")
    print(f"rmse {stats['rmse']:.6g}, mean error {stats['rel_mean_error']:.4%}, std ratio {stats['std_ratio']:.4f}")
    return 0


# --------------------------------------------------------------- stability

def cmd_stability(args):
    cfg, base = args.cfg, args.base
    params = C.turbine_params(base, cfg.get("params"))
    src = cfg.get("model", "truth:freestream")
    if isinstance(src, str) and src.startswith("truth:"):
        try:
            model = make_twin_truth(src.split(":", 1)[1])
        except ValueError as exc:
            raise C.ConfigError(f"model: {exc}") from exc
    else:
        path = C.resolve(base, src, "model")
        if not path.is_file():
            raise C.ConfigError(f"model: file not found: {path}")
        model = load_model(path)
    lambdas = C.grid(cfg.get("lambda", [3.5, 8.5, 51]), "lambda")
    default_aux = [6.5e4, 9.5e4, 7] if model.config.aux_kind == AuxKind.REYNOLDS else [3.5, 8.5, 11]
    aux = C.grid(cfg.get("aux", default_aux), "aux")
    law = cfg.get("law", "constant_rv")
    if law not in ("constant_rv", "kw2", "constant_torque"):
        raise C.ConfigError("law: expected constant_rv, kw2 or constant_torque")
    u = float(cfg.get("u", 8.0))
    rows = []
    for lam in lambdas:
        for a in aux:
            d = stability_derivative(model, params, lam, a, law, u)
            rows.append((lam, a, np.nan if d is None else d))
    rows = np.array(rows)
    viol = np.nan_to_num(rows[:, 2], nan=-np.inf) >= 0
    out = _out_dir(args)
    write_simple_csv(out / "stability.csv", ["lambda", "aux", "dfdlambda", "violation"],
                     [rows[:, 0], rows[:, 1], rows[:, 2], viol.astype(float)])
    write_json(out / "stability.json", {
        "law": law, "n_points": int(len(rows)), "n_violations": int(viol.sum()),
        "n_without_equilibrium": int(np.isnan(rows[:, 2]).sum()),
        "violations": [{"lambda": float(r[0]), "aux": float(r[1]), "dfdlambda": float(r[2])} for r in rows[viol]],
    })
    print(f"{int(viol.sum())} violation(s) on {len(rows)} grid points")
    return 0


# -------------------------------------------------------------------- main

COMMANDS = {"simulate": cmd_simulate, "identify": cmd_identify, "control": cmd_control,
            "eval": cmd_eval, "stability": cmd_stability}


def build_parser():
    parser = argparse.ArgumentParser(prog="cpident", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the configured seed")
        p.add_argument("--max-iters", type=int, default=None, help="override identify.max_iters")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.seed is not None and args.seed < 0:
        print("error: --seed must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    if args.max_iters is not None and args.max_iters < 0:
        print("error: --max-iters must be non-negative", file=sys.stderr)
        return EXIT_CONFIG
    try:
        args.cfg = C.load_yaml(args.config)
        args.base = Path(args.config).resolve().parent
        return COMMANDS[args.command](args)
    except C.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IdentificationError, IntegrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
