"""Gap between every fixed training length and the optimal policy at one block length.

    python scripts/fixed_training_sweep.py --n 1250 --trials 1000 --out results/fixed_nt.csv
"""

import argparse
import sys
from pathlib import Path

from ehtrain.harness import ExperimentConfig, fixed_nt_csv, run_fixed_nt_sweep


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1250)
    ap.add_argument("--trials", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--jobs", type=int)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args(argv)

    cfg = ExperimentConfig(trials=args.trials, seed=args.seed, fixed_nt_n=args.n)
    res = run_fixed_nt_sweep(cfg, args.n, range(1, args.n), jobs=args.jobs)

    print(f"N={args.n}, mean optimal rate {res.mean_optimal:.4f} bits/slot over {args.trials} trials")
    best = res.nt_values[int(res.gaps.argmin())]
    print(f"best fixed n_t = {best} (gap {res.gaps.min() * 100:.2f}%)")
    for th in cfg.gap_thresholds:
        iv = res.intervals[th]
        print(f"gap <= {th:.0%}: n_t in {list(iv) if iv else 'none'}")
    for v in (1, 2, 5, 10, 20, 50, 100, 200, 500, 1000):
        if v < args.n:
            print(f"  n_t={v:5d}  gap {res.gaps[v - 1] * 100:6.2f}%")
    if args.out:
        args.out.parent.mkdir(parents=True, exist_ok=True)
        args.out.write_text(fixed_nt_csv(res))
        print(f"wrote {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
