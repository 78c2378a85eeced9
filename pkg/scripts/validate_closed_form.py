"""Check the closed-form rate against direct Monte-Carlo averaging on random configurations.

    python scripts/validate_closed_form.py --cases 20 --samples 1000000
"""

import argparse
import sys

from ehtrain.harness import ExperimentConfig, validate_closed_form


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--cases", type=int, default=20)
    ap.add_argument("--samples", type=int, default=1_000_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--jobs", type=int)
    args = ap.parse_args(argv)

    report = validate_closed_form(ExperimentConfig(seed=args.seed), args.cases, args.samples, jobs=args.jobs)
    print(f"{'case':>4} {'N':>3} {'n_t':>3} {'sigma^2':>8} {'sigma_h^2':>9} {'closed':>10} {'mc':>10} {'z':>6}")
    for c in report.cases:
        z = (c.monte_carlo - c.closed_form) / c.stderr if c.stderr > 0 else 0.0
        print(f"{c.case:4d} {c.n:3d} {c.n_t:3d} {c.sigma_sq:8.3f} {c.sigma_h_sq:9.3f} "
              f"{c.closed_form:10.6f} {c.monte_carlo:10.6f} {z:+6.2f}{'' if c.passed else '  FAIL'}")
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
