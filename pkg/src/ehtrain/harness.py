"""Seeded Monte-Carlo sweeps over block lengths and fixed training lengths.

Trial ``t`` always uses profile stream ``(seed, t)`` and every policy in a
trial sees that same profile. Trials may run on a process pool; results are
merged in trial order, so the worker count never changes the output.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from functools import partial
from pathlib import Path
from typing import Callable

import numpy as np

from .dwf import SuffixHull, dwf_suffix, training_split
from .energy_model import (
    ChannelParams,
    EnergyProfile,
    RngSpec,
    generate_poisson_profile,
)
from .policies import (
    FixedMode,
    PolicyOutcome,
    fixed_policy,
    optimal_exhaustive,
    suboptimal_constant_rate,
    suboptimal_dwf_rate,
    upper_bound_non_eh,
    upper_bound_perfect_csi,
)
from .throughput import batch_throughput, block_throughput, mc_throughput_oracle

SCHEMA_VERSION = 1
CSV_COLUMNS = ("n", "policy_id", "mean_rate_bits_per_slot", "stderr", "mean_n_t", "mean_e_te")
FIXED_NT_COLUMNS = ("n", "n_t", "mean_rate_bits_per_slot", "stderr", "mean_optimal_rate", "gap_to_optimal")
BOUND_IDS = ("ub1_perfect_csi", "ub2_non_eh")


class ConfigError(ValueError):
    """Invalid experiment or policy configuration."""


def _default_policies() -> list[dict]:
    return [
        {"policy": "optimal", "ete_grid_points": 65, "refine": True},
        {"policy": "sub1_dwf_rate"},
        {"policy": "sub2_constant_rate"},
        {"policy": "fixed_slots", "value": 30},
        {"policy": "fixed_ratio", "ratio": 0.04},
        {"policy": "one_slot"},
    ]


@dataclass
class ExperimentConfig:
    block_lengths: list[int] = field(default_factory=lambda: [50, 100, 200, 400, 800, 1600])
    trials: int = 1000
    lambda_e: float = 1.0
    sigma_sq: float = 1.0
    sigma_h_sq: float = 1.0
    slot_duration: float = 1.0
    seed: int = 1
    policies: list[dict] = field(default_factory=_default_policies)
    output_path: str | None = None
    fixed_nt_n: int = 1250
    nt_values: list[int] | None = None
    gap_thresholds: list[float] = field(default_factory=lambda: [0.05, 0.10])
    validate_cases: int = 20
    validate_samples: int = 1_000_000

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.block_lengths or any(int(n) != n or n < 2 for n in self.block_lengths):
            raise ConfigError("block_lengths must be integers >= 2")
        if self.fixed_nt_n < 2:
            raise ConfigError("fixed_nt_n must be >= 2")
        if not self.lambda_e > 0:
            raise ConfigError("lambda_e must be positive")
        try:
            self.params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for spec in self.policies:
            build_policy(spec)

    def params(self) -> ChannelParams:
        return ChannelParams(self.sigma_h_sq, self.sigma_sq, self.slot_duration)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return asdict(self)


PolicyFn = Callable[[EnergyProfile, ChannelParams, SuffixHull], PolicyOutcome]

_POLICY_KEYS = {
    "optimal": {"ete_grid_points", "refine"},
    "sub1_dwf_rate": set(),
    "sub2_constant_rate": set(),
    "fixed_slots": {"value"},
    "fixed_ratio": {"ratio"},
    "one_slot": set(),
}


def build_policy(spec: dict) -> tuple[str, PolicyFn]:
    """Turn a policy config block into ``(policy_id, fn(profile, params, hull))``."""
    if not isinstance(spec, dict) or "policy" not in spec:
        raise ConfigError(f"policy block needs a 'policy' key: {spec!r}")
    name = spec["policy"]
    if name not in _POLICY_KEYS:
        raise ConfigError(f"unknown policy {name!r}; choose from {sorted(_POLICY_KEYS)}")
    extra = set(spec) - {"policy"} - _POLICY_KEYS[name]
    if extra:
        raise ConfigError(f"policy {name!r}: unknown keys {sorted(extra)}")
    try:
        if name == "optimal":
            grid = int(spec.get("ete_grid_points", 65))
            refine = bool(spec.get("refine", True))
            if grid < 2:
                raise ConfigError("ete_grid_points must be >= 2")
            return "optimal", partial(_run_optimal, grid=grid, refine=refine)
        if name == "sub1_dwf_rate":
            return name, _run_sub1
        if name == "sub2_constant_rate":
            return name, _run_sub2
        if name == "fixed_slots":
            mode = FixedMode("fixed_slots", spec.get("value", 30))
        elif name == "fixed_ratio":
            mode = FixedMode("fixed_ratio", spec.get("ratio", 0.04))
        else:
            mode = FixedMode("one_slot")
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"policy {name!r}: {exc}") from None
    return mode.policy_id, partial(_run_fixed, mode=mode)


def _run_optimal(profile, params, hull, grid, refine):
    return optimal_exhaustive(profile, params, grid, refine=refine, hull=hull)


def _run_sub1(profile, params, hull):
    return suboptimal_dwf_rate(profile, params, hull=hull)


def _run_sub2(profile, params, hull):
    return suboptimal_constant_rate(profile, params, hull=hull)


def _run_fixed(profile, params, hull, mode):
    return fixed_policy(profile, params, mode, hull=hull)


def profile_digest(profile: EnergyProfile) -> str:
    return hashlib.sha256(profile.energies.tobytes()).hexdigest()[:16]


def trial_profile(config: ExperimentConfig, n: int, trial: int) -> EnergyProfile:
    return generate_poisson_profile(n, config.lambda_e, RngSpec(config.seed, trial))


@dataclass(frozen=True)
class TrialResult:
    trial: int
    digest: str
    # policy_id -> (rate, n_t, e_te)
    values: dict


def evaluate_trial(config: ExperimentConfig, n: int, trial: int) -> TrialResult:
    params = config.params()
    profile = trial_profile(config, n, trial)
    digest = profile_digest(profile)
    hull = SuffixHull(profile)
    values = {}
    for spec in config.policies:
        pid, fn = build_policy(spec)
        out = fn(profile, params, hull)
        values[pid] = (out.rate, out.n_t, out.e_te)
    values["ub1_perfect_csi"] = (upper_bound_perfect_csi(profile, params, hull=hull), 0, 0.0)
    values["ub2_non_eh"] = (upper_bound_non_eh(profile.total_energy, n, params), 1, 0.0)
    if profile_digest(profile) != digest:
        raise RuntimeError(f"trial {trial}: profile changed while policies ran")
    return TrialResult(trial, digest, values)


def _map_trials(fn, trials: int, jobs: int | None):
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    if jobs == 1 or trials == 1:
        return [fn(t) for t in range(trials)]
    chunk = max(1, trials // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(trials), chunksize=chunk))


def default_jobs() -> int:
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else (os.cpu_count() or 1)


@dataclass(frozen=True)
class SweepRow:
    n: int
    policy_id: str
    mean_rate: float
    stderr: float
    mean_n_t: float
    mean_e_te: float


@dataclass
class SweepResult:
    rows: list[SweepRow]
    # n -> policy_id -> per-trial rates
    raw: dict
    digests: dict

    def row(self, n: int, policy_id: str) -> SweepRow:
        for r in self.rows:
            if r.n == n and r.policy_id == policy_id:
                return r
        raise KeyError((n, policy_id))


def _mean_stderr(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=float)
    mean = float(np.mean(a))
    if a.size < 2:
        return mean, 0.0
    return mean, float(np.std(a, ddof=1) / math.sqrt(a.size))


def run_policy_sweep(config: ExperimentConfig, jobs: int | None = None) -> SweepResult:
    rows: list[SweepRow] = []
    raw: dict = {}
    digests: dict = {}
    for n in config.block_lengths:
        results = _map_trials(partial(evaluate_trial, config, n), config.trials, jobs)
        ids = list(results[0].values)
        raw[n] = {pid: [r.values[pid][0] for r in results] for pid in ids}
        digests[n] = [r.digest for r in results]
        for pid in ids:
            rate, se = _mean_stderr([r.values[pid][0] for r in results])
            rows.append(SweepRow(
                n=n,
                policy_id=pid,
                mean_rate=rate,
                stderr=se,
                mean_n_t=float(np.mean([r.values[pid][1] for r in results])),
                mean_e_te=float(np.mean([r.values[pid][2] for r in results])),
            ))
    return SweepResult(rows, raw, digests)


def sweep_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result.rows:
        w.writerow([r.n, r.policy_id, repr(r.mean_rate), repr(r.stderr), repr(r.mean_n_t), repr(r.mean_e_te)])
    return buf.getvalue()


def sweep_sidecar(config: ExperimentConfig, result: SweepResult) -> dict:
    # where the output goes is not part of the run
    run_config = {k: v for k, v in config.to_dict().items() if k != "output_path"}
    return {
        "schema": SCHEMA_VERSION,
        "config": run_config,
        "profile_digests": {str(n): d for n, d in result.digests.items()},
        "rates": {str(n): per for n, per in result.raw.items()},
    }


# --------------------------------------------------------------------------
# fixed training length study


@dataclass(frozen=True)
class FixedNtTrial:
    optimal: float
    fixed: np.ndarray


def _optimal_spec(config: ExperimentConfig) -> dict:
    for spec in config.policies:
        if spec.get("policy") == "optimal":
            return spec
    return {"policy": "optimal"}


def evaluate_fixed_nt_trial(config: ExperimentConfig, n: int, nt_values: tuple, trial: int) -> FixedNtTrial:
    params = config.params()
    profile = trial_profile(config, n, trial)
    hull = SuffixHull(profile)
    _, opt = build_policy(_optimal_spec(config))
    nt = np.array(nt_values, dtype=np.int64)
    fixed = batch_throughput(hull, nt, np.zeros(nt.size), params)
    return FixedNtTrial(opt(profile, params, hull).rate, fixed)


@dataclass
class FixedNtResult:
    n: int
    nt_values: list[int]
    mean_rates: np.ndarray
    stderrs: np.ndarray
    mean_optimal: float
    gaps: np.ndarray
    # threshold -> (lo, hi) of the run around the smallest gap, or None
    intervals: dict
    # threshold -> every maximal contiguous run with gap <= threshold
    all_runs: dict

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_VERSION,
            "n": self.n,
            "mean_optimal_rate": self.mean_optimal,
            "intervals": {f"{t:g}": list(iv) if iv else None for t, iv in self.intervals.items()},
            "all_runs": {f"{t:g}": [list(r) for r in runs] for t, runs in self.all_runs.items()},
        }


def contiguous_runs(nt_values, mask) -> list[tuple[int, int]]:
    """Maximal runs of consecutive integers ``n_t`` where ``mask`` holds."""
    runs = []
    start = prev = None
    for v, ok in zip(nt_values, mask):
        if ok and start is not None and v == prev + 1:
            prev = v
            continue
        if start is not None:
            runs.append((start, prev))
            start = None
        if ok:
            start = prev = v
    if start is not None:
        runs.append((start, prev))
    return runs


def run_fixed_nt_sweep(
    config: ExperimentConfig, n: int | None = None, nt_values=None, jobs: int | None = None
) -> FixedNtResult:
    n = config.fixed_nt_n if n is None else n
    if nt_values is None:
        nt_values = config.nt_values or range(1, n)
    nt_values = sorted(int(v) for v in nt_values)
    if not nt_values or nt_values[0] < 1 or nt_values[-1] > n - 1:
        raise ConfigError(f"n_t values must lie in 1..{n - 1}")
    results = _map_trials(
        partial(evaluate_fixed_nt_trial, config, n, tuple(nt_values)), config.trials, jobs
    )
    fixed = np.array([r.fixed for r in results])
    opt = np.array([r.optimal for r in results])
    means = fixed.mean(axis=0)
    stderrs = fixed.std(axis=0, ddof=1) / math.sqrt(len(results)) if len(results) > 1 else np.zeros(len(nt_values))
    mean_opt = float(opt.mean())
    gaps = 1.0 - means / mean_opt if mean_opt > 0 else np.zeros(len(nt_values))
    best = nt_values[int(np.argmin(gaps))]
    intervals, all_runs = {}, {}
    for th in config.gap_thresholds:
        runs = contiguous_runs(nt_values, gaps <= th)
        all_runs[th] = runs
        intervals[th] = next((r for r in runs if r[0] <= best <= r[1]), None)
    return FixedNtResult(n, nt_values, means, stderrs, mean_opt, gaps, intervals, all_runs)


def fixed_nt_csv(result: FixedNtResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(FIXED_NT_COLUMNS)
    for v, m, se, g in zip(result.nt_values, result.mean_rates, result.stderrs, result.gaps):
        w.writerow([result.n, v, repr(float(m)), repr(float(se)), repr(result.mean_optimal), repr(float(g))])
    return buf.getvalue()


# --------------------------------------------------------------------------
# closed form against Monte Carlo


@dataclass(frozen=True)
class ValidationCase:
    case: int
    n: int
    n_t: int
    e_te: float
    sigma_sq: float
    sigma_h_sq: float
    energies: list
    closed_form: float
    monte_carlo: float
    stderr: float
    passed: bool


@dataclass
class ValidationReport:
    cases: list[ValidationCase]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cases)

    def failures(self) -> list[ValidationCase]:
        return [c for c in self.cases if not c.passed]


def agreement(closed: float, mc: float, stderr: float) -> bool:
    return abs(mc - closed) <= max(3.0 * stderr, 1e-3 * abs(closed))


def validate_case(config: ExperimentConfig, case: int, samples: int) -> ValidationCase:
    spec = RngSpec(config.seed, case)
    g = spec.generator(1)
    n = int(g.integers(2, 41))
    sigma_sq = float(10.0 ** g.uniform(-1.0, 1.0))
    sigma_h_sq = float(10.0 ** g.uniform(-1.0, 1.0))
    profile = generate_poisson_profile(n, config.lambda_e, spec)
    params = ChannelParams(sigma_h_sq, sigma_sq, config.slot_duration)
    n_t = int(g.integers(1, n))
    e_te = float(g.uniform()) * float(profile.energies[n_t - 1])
    decision = training_split(profile, n_t, e_te, params)
    alloc = dwf_suffix(profile, n_t, e_te, params)
    closed = block_throughput(profile, decision, alloc, params).bits_per_slot
    mc, se = mc_throughput_oracle(profile, decision, alloc, params, samples,
                                  RngSpec(config.seed, 1_000_000 + case))
    return ValidationCase(case, n, n_t, e_te, sigma_sq, sigma_h_sq, profile.energies.tolist(),
                          closed, mc, se, agreement(closed, mc, se))


def validate_closed_form(
    config: ExperimentConfig, cases: int | None = None, samples: int | None = None,
    jobs: int | None = None,
) -> ValidationReport:
    cases = config.validate_cases if cases is None else cases
    samples = config.validate_samples if samples is None else samples
    if samples < 10_000:
        raise ConfigError("validation needs at least 10^4 samples per case")
    return ValidationReport(_map_trials(partial(validate_case, config, samples=samples), cases, jobs))
