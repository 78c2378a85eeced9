"""Training-design policies and the two throughput upper bounds.

Every training policy ends in :func:`execute`: train for ``n_t`` slots under
the exhaust rule, keep ``e_te`` back, water-fill the rest of the block and
score it with :func:`~ehtrain.throughput.block_throughput`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import bisect

from .dwf import PowerAllocation, SuffixHull, TrainingDecision, dwf_allocate, training_split
from .energy_model import ChannelParams, EnergyProfile, average_eh_rate
from .special_fns import exp_e1
from .throughput import (
    LOG2E,
    batch_throughput,
    block_throughput,
    k_factor,
    perfect_csi_throughput,
    slot_rate_term,
)

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
ROOT_XTOL = 1e-10


class ModelDomainError(ArithmeticError):
    """A closed-form expression left its domain of validity."""


@dataclass(frozen=True)
class PolicyOutcome:
    policy_id: str
    n_t: int
    e_te: float
    decision: TrainingDecision
    data_alloc: PowerAllocation
    rate: float
    clamped: bool = False
    info: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "n_t": self.n_t,
            "e_te": self.e_te,
            "rate_bits_per_slot": self.rate,
            "training_energy_sum": self.decision.training_energy_sum,
            "data_alloc": self.data_alloc.to_json(),
            "clamped": self.clamped,
            **({"info": self.info} if self.info else {}),
        }


def execute(
    policy_id: str,
    profile: EnergyProfile,
    params: ChannelParams,
    n_t: int,
    e_te: float = 0.0,
    hull: SuffixHull | None = None,
    **extra,
) -> PolicyOutcome:
    hull = hull or SuffixHull(profile)
    decision = training_split(profile, n_t, e_te, params)
    alloc = hull.allocation(n_t, float(e_te), params.slot_duration)
    rate = block_throughput(profile, decision, alloc, params).bits_per_slot
    return PolicyOutcome(policy_id, n_t, float(e_te), decision, alloc, rate, **extra)


def golden_section_max(f: Callable[[float], float], lo: float, hi: float, tol: float):
    """Maximise a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


# --------------------------------------------------------------------------
# exhaustive optimum


def _exhaustive_upper_bound(profile: EnergyProfile, params: ChannelParams) -> np.ndarray:
    # Per n_t bound on the rate over every e_te: Jensen over the data slots
    # (M(K(P, S)) is concave in P) with data energy and training sum each at
    # their largest possible value.
    n = profile.n
    ts = params.slot_duration
    cum = profile.cumulative
    nt = np.arange(1, n)
    p_max = (cum[n] - cum[nt] + profile.energies[nt - 1]) / ((n - nt) * ts)
    s_max = cum[nt] / ts
    return LOG2E / n * (n - nt) * slot_rate_term(k_factor(p_max, s_max, params))


def optimal_exhaustive(
    profile: EnergyProfile,
    params: ChannelParams,
    ete_grid_points: int = 65,
    refine: bool = True,
    hull: SuffixHull | None = None,
) -> PolicyOutcome:
    """Search every ``n_t`` in ``1..N-1`` and a uniform ``e_te`` grid on ``[0, E_{n_t-1}]``.

    Ties go to the smaller ``n_t``, then the smaller ``e_te``. With
    ``refine`` a golden-section pass between the neighbours of the best grid
    point may improve ``e_te`` further. Values of ``n_t`` whose rate bound
    falls below the best ``e_te = 0`` rate are skipped; this never changes
    the result.
    """
    n = profile.n
    if n < 2:
        raise ValueError("block needs at least 2 slots")
    if ete_grid_points < 2:
        raise ValueError("ete_grid_points must be >= 2")
    hull = hull or SuffixHull(profile)
    energies = profile.energies

    all_nt = np.arange(1, n)
    floor_rate = batch_throughput(hull, all_nt, np.zeros(n - 1), params).max()
    bound = _exhaustive_upper_bound(profile, params)
    keep = all_nt[bound * (1.0 + 1e-9) >= floor_rate]

    fractions = np.linspace(0.0, 1.0, ete_grid_points)
    last = energies[keep - 1]
    counts = np.where(last > 0, ete_grid_points, 1)
    nt_rows = np.repeat(keep, counts)
    frac_rows = np.concatenate([fractions[:c] for c in counts]) if keep.size else np.zeros(0)
    e_rows = energies[nt_rows - 1] * frac_rows
    rates = batch_throughput(hull, nt_rows, e_rows, params)
    best = int(np.argmax(rates))
    n_t, e_te, rate = int(nt_rows[best]), float(e_rows[best]), float(rates[best])

    last_e = float(energies[n_t - 1])
    if refine and last_e > 0:
        step = last_e / (ete_grid_points - 1)
        lo, hi = max(0.0, e_te - step), min(last_e, e_te + step)

        def f(x):
            return float(batch_throughput(hull, [n_t], [x], params)[0])

        x, fx = golden_section_max(f, lo, hi, 1e-6 * last_e)
        if fx > rate:
            e_te, rate = x, fx

    return execute("optimal", profile, params, n_t, e_te, hull=hull,
                   info={"ete_grid_points": ete_grid_points, "n_t_searched": int(keep.size)})


# --------------------------------------------------------------------------
# sub-optimal solution 1: fixed DWF powers, averaged training power


@dataclass(frozen=True)
class Eq5Context:
    """Quantities of the simplified training problem for one profile.

    ``lengths``/``powers`` describe the DWF allocation over the whole block;
    ``p_bar_h`` is the average harvesting rate.
    """

    n: int
    lengths: np.ndarray
    powers: np.ndarray
    p_bar_h: float
    params: ChannelParams

    @classmethod
    def from_profile(cls, profile: EnergyProfile, params: ChannelParams,
                     hull: SuffixHull | None = None) -> "Eq5Context":
        alloc = dwf_allocate(profile, params, hull=hull)
        return cls(profile.n, alloc.lengths().astype(float), np.array(alloc.powers),
                   average_eh_rate(profile, params), params)

    def _active(self):
        # zero-power slots contribute nothing for any n_t
        on = self.powers > 0
        return self.lengths[on], self.powers[on]

    def g(self, n_t: float) -> np.ndarray:
        a, b = self.params.sigma_sq, self.params.sigma_h_sq
        _, p = self._active()
        return b * self.p_bar_h * n_t / (a + b * p)

    def m(self, n_t: float) -> np.ndarray:
        _, p = self._active()
        return slot_rate_term(k_factor(p, n_t * self.p_bar_h, self.params))

    def m_asymptotic(self) -> np.ndarray:
        a, b = self.params.sigma_sq, self.params.sigma_h_sq
        _, p = self._active()
        return np.array([exp_e1(a / (b * pi)) for pi in p])

    def stationarity(self, n_t: float) -> float:
        """Left side of the stationarity condition in ``n_t`` (negative slope of the objective)."""
        a, b = self.params.sigma_sq, self.params.sigma_h_sq
        lengths, p = self._active()
        g = self.g(n_t)
        m = self.m(n_t)
        r = self.n / n_t - 1.0
        return float(np.dot(lengths, m * (1.0 + r * a / (b * p * g)) - r / (1.0 + g)))

    def objective(self, n_t: float) -> float:
        """Approximate rate ``(N - n_t)/N * sum_i M_i`` (nats, unscaled by 1/N)."""
        lengths, _ = self._active()
        return (self.n - n_t) / self.n * float(np.dot(lengths, self.m(n_t)))

    def w(self) -> float:
        a, b = self.params.sigma_sq, self.params.sigma_h_sq
        lengths, p = self._active()
        ma = self.m_asymptotic()
        num = float(np.dot(lengths, ma))
        den = float(np.dot(lengths, (a * a + a * b * p) / (a * b * self.p_bar_h) * (1.0 - a * ma / (b * p))))
        return num / den if den != 0 else math.inf


def _continuous_root(lhs: Callable[[float], float], objective: Callable[[float], float], n: int) -> float:
    """Root in ``n_t`` of a stationarity condition, bisected in ``x = 1/n_t``."""
    hi_nt = float(n - 1)
    if hi_nt <= 1.0:
        return 1.0
    f_lo = lhs(1.0)
    f_hi = lhs(hi_nt)
    if not (f_lo < 0.0 < f_hi):
        return 1.0 if objective(1.0) >= objective(hi_nt) else hi_nt
    x = bisect(lambda x: lhs(1.0 / x), 1.0 / hi_nt, 1.0, xtol=ROOT_XTOL)
    return 1.0 / x


def _discretize(root: float, objective: Callable[[float], float], n: int) -> int:
    lo = min(max(math.floor(root), 1), n - 1)
    hi = min(max(math.ceil(root), 1), n - 1)
    return hi if objective(hi) > objective(lo) else lo


def suboptimal_dwf_rate(
    profile: EnergyProfile, params: ChannelParams, hull: SuffixHull | None = None
) -> PolicyOutcome:
    """Sub-optimal solution 1: pick ``n_t`` on the simplified problem, then run it for real."""
    n = profile.n
    if n < 2:
        raise ValueError("block needs at least 2 slots")
    hull = hull or SuffixHull(profile)
    if profile.total_energy <= 0:
        return execute("sub1_dwf_rate", profile, params, 1, hull=hull, info={"degenerate": True})
    ctx = Eq5Context.from_profile(profile, params, hull=hull)
    root = _continuous_root(ctx.stationarity, ctx.objective, n)
    n_t = _discretize(root, ctx.objective, n)
    return execute("sub1_dwf_rate", profile, params, n_t, hull=hull, info={"continuous_n_t": root})


class AsymptoticPeriod(NamedTuple):
    n_t: float
    alpha: float
    w: float


def asymptotic_training_period(profile: EnergyProfile, params: ChannelParams) -> AsymptoticPeriod:
    """Large-``N`` closed form ``n_t = 2N / (1 + sqrt(1 + 4 N W))``."""
    ctx = Eq5Context.from_profile(profile, params)
    if not np.any(ctx.powers > 0):
        raise ModelDomainError("closed form needs at least one slot with positive power")
    w = ctx.w()
    if not (math.isfinite(w) and w > 0):
        raise ModelDomainError(f"closed form requires finite W > 0, got {w!r}")
    n = profile.n
    n_t = 2.0 * n / (1.0 + math.sqrt(1.0 + 4.0 * n * w))
    return AsymptoticPeriod(n_t, n_t / n, w)


# --------------------------------------------------------------------------
# sub-optimal solution 2: constant-rate equivalent


def _constant_rate_context(p_h: float, n: int, params: ChannelParams) -> Eq5Context:
    return Eq5Context(n, np.array([1.0]), np.array([float(p_h)]), float(p_h), params)


def constant_rate_objective(n_t: float, p_h: float, n: int, params: ChannelParams) -> float:
    """``(N - n_t)/N * exp(1/K) E1(1/K)`` with training and data power both ``p_h``."""
    return (n - n_t) / n * slot_rate_term(k_factor(p_h, n_t * p_h, params))


def constant_rate_optimum(p_h: float, n: int, params: ChannelParams) -> int:
    """Optimal training length for a constant harvesting rate ``p_h``."""
    if not p_h > 0:
        raise ValueError("p_h must be positive")
    if n < 2:
        raise ValueError("block needs at least 2 slots")
    ctx = _constant_rate_context(p_h, n, params)

    def objective(n_t):
        return constant_rate_objective(n_t, p_h, n, params)

    root = _continuous_root(ctx.stationarity, objective, n)
    return _discretize(root, objective, n)


def suboptimal_constant_rate(
    profile: EnergyProfile, params: ChannelParams, hull: SuffixHull | None = None
) -> PolicyOutcome:
    """Sub-optimal solution 2: ``n_t`` from the average rate only, then DWF on the real profile."""
    p_hat = average_eh_rate(profile, params)
    if p_hat <= 0:
        return execute("sub2_constant_rate", profile, params, 1, hull=hull, info={"degenerate": True})
    n_t = constant_rate_optimum(p_hat, profile.n, params)
    return execute("sub2_constant_rate", profile, params, n_t, hull=hull)


# --------------------------------------------------------------------------
# fixed baselines


@dataclass(frozen=True)
class FixedMode:
    kind: str  # "fixed_slots" | "fixed_ratio" | "one_slot"
    value: float = 1.0

    def __post_init__(self):
        if self.kind == "fixed_slots" and not (self.value >= 1 and float(self.value).is_integer()):
            raise ValueError("fixed_slots needs an integer value >= 1")
        if self.kind == "fixed_ratio" and not 0 < self.value < 1:
            raise ValueError("fixed_ratio needs 0 < ratio < 1")
        if self.kind not in ("fixed_slots", "fixed_ratio", "one_slot"):
            raise ValueError(f"unknown fixed mode {self.kind!r}")

    @property
    def policy_id(self) -> str:
        if self.kind == "fixed_slots":
            return f"fixed_{int(self.value)}"
        if self.kind == "fixed_ratio":
            return f"ratio_{self.value:g}"
        return "one_slot"

    def requested(self, n: int) -> int:
        if self.kind == "fixed_slots":
            return int(self.value)
        if self.kind == "fixed_ratio":
            return int(math.floor(self.value * n + 0.5))
        return 1


def fixed_policy(
    profile: EnergyProfile, params: ChannelParams, mode: FixedMode, hull: SuffixHull | None = None
) -> PolicyOutcome:
    n = profile.n
    want = mode.requested(n)
    n_t = min(max(want, 1), n - 1)
    return execute(mode.policy_id, profile, params, n_t, hull=hull, clamped=n_t != want,
                   info={"requested_n_t": want} if n_t != want else {})


# --------------------------------------------------------------------------
# upper bounds


def upper_bound_non_eh(total_energy: float, n: int, params: ChannelParams) -> float:
    """Upper bound 2: same total energy available up front, one pilot slot, constant data power."""
    if total_energy < 0:
        raise ValueError("total_energy must be nonnegative")
    if n < 2:
        raise ValueError("block needs at least 2 slots")
    if total_energy == 0:
        return 0.0
    ts = params.slot_duration

    def rate(rho):
        s = rho * total_energy / ts
        p = (1.0 - rho) * total_energy / ((n - 1) * ts)
        return (n - 1) / n * LOG2E * slot_rate_term(k_factor(p, s, params))

    _, best = golden_section_max(rate, 0.0, 1.0, 1e-9)
    return best


def upper_bound_perfect_csi(
    profile: EnergyProfile, params: ChannelParams, hull: SuffixHull | None = None
) -> float:
    """Upper bound 1: perfect channel knowledge, DWF over every slot, no training."""
    return perfect_csi_throughput(dwf_allocate(profile, params, hull=hull), params).bits_per_slot
