"""Closed-loop studies: upstream tracking with different controller maps, and a wake step.

    python scripts/control.py --models runs/lt_study --out runs/control_study

``--models`` points at the output of ``scripts/low_turbulence.py``; without
it only the truth and biased maps are compared.
"""
import argparse
import json
from pathlib import Path

from cpident.data import load_model, write_trajectory_csv
from cpident.experiments import truth_for, upstream_tracking, wake_step


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--models", type=Path, default=None)
    ap.add_argument("--out", type=Path, default=Path("runs/control_study"))
    ap.add_argument("--bias", type=float, default=1.3)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    maps = {"truth": truth_for(0), "biased": truth_for(0).scaled(args.bias)}
    if args.models is not None:
        maps["identified"] = load_model(args.models / "turbine_1_final.txt")
        maps["init"] = load_model(args.models / "turbine_1_init.txt")
    summary = {"tracking": {}, "wake_step": {}}
    for name, model in maps.items():
        res = upstream_tracking(model)
        write_trajectory_csv(args.out / f"tracking_{name}.csv", res.trajectory)
        summary["tracking"][name] = {**res.metrics[0], "segments": res.segments[0]}
        print(f"{name:>10}: tracking RMS {res.metrics[0]['rms_error']:.4f}, mean {res.metrics[0]['mean_error']:+.4f}")
    for mode in ("kw2", "fixed"):
        t, lam, res = wake_step(mode)
        write_trajectory_csv(args.out / f"wake_step_{mode}.csv", res.trajectory)
        late = float(lam[t >= 50.0].mean())
        summary["wake_step"][mode] = {"late_lambda": late, "reference": 5.5}
        print(f"wake step, downstream {mode}: late lambda {late:.3f} (reference 5.5)")
    (args.out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()
