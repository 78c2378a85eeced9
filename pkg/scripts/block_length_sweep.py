"""Mean rate of every policy against block length, with gaps to the optimum.

    python scripts/block_length_sweep.py --trials 1000 --out results/sweep.csv
"""

import argparse
import sys
from pathlib import Path

from ehtrain.harness import ExperimentConfig, run_policy_sweep, sweep_csv


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--n", type=int, nargs="+", default=[50, 100, 200, 400, 800, 1600])
    ap.add_argument("--grid", type=int, default=65, help="e_te grid points for the optimal policy")
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args(argv)

    cfg = ExperimentConfig(block_lengths=args.n, trials=args.trials, seed=args.seed)
    cfg.policies[0] = {"policy": "optimal", "ete_grid_points": args.grid, "refine": True}
    res = run_policy_sweep(cfg, jobs=args.jobs)

    ids = list(res.raw[args.n[0]])
    print(f"{'N':>6} " + " ".join(f"{pid:>18}" for pid in ids))
    for n in args.n:
        opt = res.row(n, "optimal").mean_rate
        cells = []
        for pid in ids:
            r = res.row(n, pid).mean_rate
            cells.append(f"{r:9.4f} ({(1 - r / opt) * 100:+5.1f}%)")
        print(f"{n:>6} " + " ".join(f"{c:>18}" for c in cells))
    print("(percent: gap below the optimal policy; negative for the upper bounds)")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(sweep_csv(res))
        print(f"wrote {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
