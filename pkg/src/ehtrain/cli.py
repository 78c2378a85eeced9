"""Command line entry point: ``ehtrain {sweep,fixed-nt,validate,solve}``.

Exit codes: 0 success, 1 validation failure, 2 configuration or I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .energy_model import ProfileFormatError, load_profile
from .harness import (
    ConfigError,
    ExperimentConfig,
    build_policy,
    default_jobs,
    fixed_nt_csv,
    run_fixed_nt_sweep,
    run_policy_sweep,
    sweep_csv,
    sweep_sidecar,
    validate_closed_form,
)
from .dwf import SuffixHull

EXIT_OK, EXIT_VALIDATION, EXIT_CONFIG = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ehtrain", description=__doc__.splitlines()[0])
    p.add_argument("--dump-defaults", action="store_true", help="print the default config as JSON and exit")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON experiment config")
    common.add_argument("--seed", type=int)
    common.add_argument("--trials", type=int)
    common.add_argument("--out", type=Path, help="output file (default: stdout)")
    common.add_argument("--jobs", type=int, help="worker processes (default: available CPUs)")
    sub = p.add_subparsers(dest="command")

    s = sub.add_parser("sweep", parents=[common], help="mean rate of every policy per block length")
    s.add_argument("--n", type=int, nargs="+", help="block lengths (overrides config)")
    s.add_argument("--raw", action="store_true", help="also write per-trial rates to <out>.json")

    f = sub.add_parser("fixed-nt", parents=[common], help="fixed training length against the optimum")
    f.add_argument("--n", type=int, help="block length (default from config: 1250)")
    f.add_argument("--nt-min", type=int, default=1)
    f.add_argument("--nt-max", type=int)

    v = sub.add_parser("validate", parents=[common], help="closed-form rate against Monte Carlo")
    v.add_argument("--cases", type=int)
    v.add_argument("--samples", type=int)

    o = sub.add_parser("solve", parents=[common], help="run one policy on a profile file")
    o.add_argument("profile", type=Path, help="JSON {\"energies\": [...]} or CSV with header 'energy'")
    o.add_argument("--policy", default="optimal",
                   help="optimal, sub1_dwf_rate, sub2_constant_rate, fixed_slots, fixed_ratio, one_slot")
    o.add_argument("--value", type=int, help="training slots for fixed_slots")
    o.add_argument("--ratio", type=float, help="training ratio for fixed_ratio")
    o.add_argument("--grid", type=int, help="e_te grid points for optimal")
    return p


def _config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    doc = cfg.to_dict()
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.trials is not None:
        doc["trials"] = args.trials
    if args.out is not None:
        doc["output_path"] = str(args.out)
    if getattr(args, "n", None) is not None:
        key = "block_lengths" if args.command == "sweep" else "fixed_nt_n"
        doc[key] = args.n
    return ExperimentConfig.from_dict(doc)


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _cmd_sweep(args, cfg: ExperimentConfig) -> int:
    result = run_policy_sweep(cfg, jobs=args.jobs)
    out = Path(cfg.output_path) if cfg.output_path else None
    _emit(sweep_csv(result), out)
    if args.raw:
        if out is None:
            raise ConfigError("--raw needs --out")
        out.with_suffix(".json").write_text(json.dumps(sweep_sidecar(cfg, result), indent=1) + "\n")
    return EXIT_OK


def _cmd_fixed_nt(args, cfg: ExperimentConfig) -> int:
    n = cfg.fixed_nt_n
    hi = args.nt_max if args.nt_max is not None else n - 1
    result = run_fixed_nt_sweep(cfg, n, range(args.nt_min, hi + 1), jobs=args.jobs)
    out = Path(cfg.output_path) if cfg.output_path else None
    _emit(fixed_nt_csv(result), out)
    if out is not None:
        out.with_suffix(".json").write_text(json.dumps(result.to_json(), indent=1) + "\n")
    for th, iv in result.intervals.items():
        span = f"[{iv[0]}, {iv[1]}]" if iv else "none"
        print(f"gap <= {th:.0%}: n_t in {span}", file=sys.stderr)
    return EXIT_OK


def _cmd_validate(args, cfg: ExperimentConfig) -> int:
    report = validate_closed_form(cfg, args.cases, args.samples, jobs=args.jobs)
    lines = []
    for c in report.cases:
        status = "ok  " if c.passed else "FAIL"
        lines.append(
            f"{status} case {c.case:3d}  N={c.n:3d} n_t={c.n_t:3d} closed={c.closed_form:.6f} "
            f"mc={c.monte_carlo:.6f} se={c.stderr:.2e}"
        )
    for c in report.failures():
        lines.append("failing config: " + json.dumps({
            "n": c.n, "n_t": c.n_t, "e_te": c.e_te, "sigma_sq": c.sigma_sq,
            "sigma_h_sq": c.sigma_h_sq, "energies": c.energies}))
    lines.append("PASS" if report.passed else "FAIL")
    _emit("\n".join(lines) + "\n", Path(cfg.output_path) if cfg.output_path else None)
    return EXIT_OK if report.passed else EXIT_VALIDATION


def _cmd_solve(args, cfg: ExperimentConfig) -> int:
    profile = load_profile(args.profile)
    spec = {"policy": args.policy}
    if args.value is not None:
        spec["value"] = args.value
    if args.ratio is not None:
        spec["ratio"] = args.ratio
    if args.grid is not None:
        spec["ete_grid_points"] = args.grid
    if profile.n < 2:
        raise ConfigError("profile needs at least 2 slots")
    _, fn = build_policy(spec)
    outcome = fn(profile, cfg.params(), SuffixHull(profile))
    doc = outcome.to_json()
    doc["training_powers"] = list(outcome.decision.training_powers)
    _emit(json.dumps(doc, indent=2) + "\n", Path(cfg.output_path) if cfg.output_path else None)
    print(
        f"{outcome.policy_id}: N={profile.n} n_t={outcome.n_t} e_te={outcome.e_te:.6g} "
        f"rate={outcome.rate:.6f} bits/slot over {len(outcome.data_alloc.powers)} data interval(s)",
        file=sys.stderr,
    )
    return EXIT_OK


COMMANDS = {"sweep": _cmd_sweep, "fixed-nt": _cmd_fixed_nt, "validate": _cmd_validate, "solve": _cmd_solve}


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    if args.dump_defaults:
        print(json.dumps(ExperimentConfig().to_dict(), indent=2))
        return EXIT_OK
    if args.command is None:
        parser.print_help(sys.stderr)
        return EXIT_CONFIG
    if args.jobs is None:
        args.jobs = default_jobs()
    try:
        cfg = _config(args)
        return COMMANDS[args.command](args, cfg)
    except (ConfigError, ProfileFormatError, OSError) as exc:
        print(f"ehtrain: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
