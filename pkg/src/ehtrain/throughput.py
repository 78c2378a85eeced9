"""Achievable throughput with an MMSE channel estimate.

Rates are bits per slot averaged over the whole block (training slots count
in the denominator but contribute nothing). For data power ``P`` and total
training power ``S`` the per-slot expectation over Rayleigh fading is
``M = exp(1/K) E1(1/K)`` nats with

    K = sh^4 P S / (s^4 + s^2 sh^2 P + s^2 sh^2 S)

where ``s^2`` is the noise variance and ``sh^2`` the channel variance.

All closed-form rates go through :func:`_interval_rates`, which sums interval
terms in a fixed order, so a decision evaluated one at a time or inside a
batch yields the same float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dwf import PowerAllocation, SuffixHull, TrainingDecision
from .energy_model import ChannelParams, EnergyProfile, RngSpec
from .special_fns import exp_e1_array

LOG2E = 1.0 / math.log(2.0)


@dataclass(frozen=True)
class EstimationState:
    error_var: float
    estimate_var: float
    training_energy_sum: float


@dataclass(frozen=True)
class RateReport:
    bits_per_slot: float
    per_slot_terms: tuple[float, ...]
    n_t_used: int


def estimation_error_variance(
    training_power_sum: float, params: ChannelParams, training_energy_sum: float | None = None
) -> EstimationState:
    """MMSE error variance after pilots with total power ``training_power_sum``."""
    s = float(training_power_sum)
    if s < 0:
        raise ValueError("training power sum must be nonnegative")
    a, b = params.sigma_sq, params.sigma_h_sq
    # both shares computed directly: no cancellation, and err <= b exactly
    err = b * (a / (a + b * s))
    known = b * (b * s / (a + b * s))
    energy = s * params.slot_duration if training_energy_sum is None else training_energy_sum
    return EstimationState(error_var=err, estimate_var=known, training_energy_sum=energy)


def k_factor(data_power, training_power_sum, params: ChannelParams):
    """Effective SNR ``K``; works elementwise on arrays."""
    a, b = params.sigma_sq, params.sigma_h_sq
    p = data_power
    s = training_power_sum
    return (b * b) * p * s / (a * a + (a * b) * p + (a * b) * s)


def slot_rate_term(k):
    """``exp(1/k) E1(1/k)`` with the limit value 0 at ``k = 0``.

    For ``k`` so small that ``1/k`` overflows the term (below ``k``) is 0.
    """
    k_arr = np.asarray(k, dtype=float)
    if np.any(k_arr < 0):
        raise ValueError("k must be nonnegative")
    out = np.zeros(k_arr.shape)
    with np.errstate(over="ignore", divide="ignore"):
        inv = 1.0 / k_arr
    pos = np.isfinite(inv) & (k_arr > 0)
    if pos.any():
        out[pos] = exp_e1_array(inv[pos])
    return float(out) if out.ndim == 0 else out


def _interval_rates(rows, lengths, powers, s_per_row, n_rows, params: ChannelParams):
    """Sum ``len * M(K(P, S_row))`` per row, in element order (``bincount`` is sequential)."""
    k = k_factor(powers, s_per_row[rows], params)
    terms = lengths * slot_rate_term(k)
    return np.bincount(rows, weights=terms, minlength=n_rows), terms


def _data_intervals(decision: TrainingDecision, data_alloc: PowerAllocation, n: int):
    if data_alloc.start_slot != decision.n_t or data_alloc.end_slot != n:
        raise ValueError(
            f"data allocation covers ({data_alloc.start_slot}, {data_alloc.end_slot}], "
            f"expected ({decision.n_t}, {n}]"
        )
    return data_alloc.lengths().astype(float), np.array(data_alloc.powers, dtype=float)


def block_throughput(
    profile: EnergyProfile,
    decision: TrainingDecision,
    data_alloc: PowerAllocation,
    params: ChannelParams,
) -> RateReport:
    n = profile.n
    lengths, powers = _data_intervals(decision, data_alloc, n)
    s = np.array([decision.training_energy_sum / params.slot_duration])
    rows = np.zeros(lengths.size, dtype=np.int64)
    total, _ = _interval_rates(rows, lengths, powers, s, 1, params)
    per_interval = slot_rate_term(k_factor(powers, s[0], params))
    return RateReport(
        bits_per_slot=float(LOG2E / n * total[0]),
        per_slot_terms=tuple(np.repeat(per_interval, data_alloc.lengths()).tolist()),
        n_t_used=decision.n_t,
    )


def perfect_csi_throughput(data_alloc: PowerAllocation, params: ChannelParams) -> RateReport:
    """Rate with a perfectly known channel and no training slots."""
    if data_alloc.start_slot != 0:
        raise ValueError("perfect-CSI allocation must cover the whole block")
    n = data_alloc.end_slot
    powers = np.array(data_alloc.powers, dtype=float)
    k = params.sigma_h_sq * powers / params.sigma_sq
    m = slot_rate_term(k)
    total = float(np.dot(data_alloc.lengths(), m))
    return RateReport(
        bits_per_slot=LOG2E / n * total,
        per_slot_terms=tuple(np.repeat(m, data_alloc.lengths()).tolist()),
        n_t_used=0,
    )


def batch_throughput(hull: SuffixHull, n_t, e_te, params: ChannelParams) -> np.ndarray:
    """Rates of many ``(n_t, e_te)`` decisions on one profile.

    Each decision trains for ``n_t`` slots keeping ``e_te`` back and sends data
    with the DWF allocation of the remaining slots. The result equals
    ``block_throughput(..., dwf_suffix(profile, n_t, e_te))`` bit for bit.
    """
    n_t = np.ascontiguousarray(n_t, dtype=np.int64)
    e = np.ascontiguousarray(e_te, dtype=float)
    n = hull.n
    ts = params.slot_duration
    cum, nxt = hull.cum, hull.next
    rows_total = n_t.size
    base = cum[n_t]

    # first breakpoint: same walk and comparison as SuffixHull._tangent
    u = n_t + 1
    active = u < n
    while active.any():
        idx = np.flatnonzero(active)
        uu = u[idx]
        w = nxt[uu]
        st = n_t[idx]
        b = base[idx]
        ee = e[idx]
        adv = ((cum[w] - b) + ee) * (uu - st) <= ((cum[uu] - b) + ee) * (w - st)
        u[idx[adv]] = w[adv]
        active[idx[~adv]] = False
        active[idx[adv]] = w[adv] < n

    rows = [np.arange(rows_total)]
    lengths = [u - n_t]
    powers = [((cum[u] - base) + e) / ((u - n_t) * ts)]
    # remaining breakpoints, emitted level by level so each row stays in order
    cur_rows = np.flatnonzero(u < n)
    cur = u[cur_rows]
    while cur_rows.size:
        nx = nxt[cur]
        rows.append(cur_rows)
        lengths.append(nx - cur)
        powers.append((cum[nx] - cum[cur]) / ((nx - cur) * ts))
        keep = nx < n
        cur_rows, cur = cur_rows[keep], nx[keep]

    rows = np.concatenate(rows)
    order = np.argsort(rows, kind="stable")
    s = (base - e) / ts
    total, _ = _interval_rates(
        rows[order],
        np.concatenate(lengths)[order].astype(float),
        np.concatenate(powers)[order],
        s,
        rows_total,
        params,
    )
    return LOG2E / n * total


def mc_throughput_oracle(
    profile: EnergyProfile,
    decision: TrainingDecision,
    data_alloc: PowerAllocation,
    params: ChannelParams,
    samples: int,
    rng: RngSpec,
    chunk: int = 1 << 17,
) -> tuple[float, float]:
    """Monte-Carlo estimate of the rate by direct averaging over the channel estimate.

    Draws ``h_hat ~ CN(0, sh^2 - err_var)`` by Box-Muller and averages
    ``(1/N) sum_i log2(1 + |h_hat|^2 P_i / (s^2 + P_i err_var))``.
    Chunk ``j`` uses substream ``j`` of ``rng``; partial sums are merged in
    chunk order. Returns ``(estimate, standard_error)``.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    n = profile.n
    lengths, powers = _data_intervals(decision, data_alloc, n)
    est = estimation_error_variance(decision.training_energy_sum / params.slot_duration, params)
    if est.estimate_var <= 0.0:
        return 0.0, 0.0
    gain_scale = powers / (params.sigma_sq + powers * est.error_var)
    total = 0.0
    total_sq = 0.0
    done = 0
    j = 0
    while done < samples:
        m = min(chunk, samples - done)
        g = rng.generator(j)
        u1 = 1.0 - g.random(m)
        u2 = g.random(m)
        radius = np.sqrt(-2.0 * np.log(u1))
        z1 = radius * np.cos(2.0 * np.pi * u2)
        z2 = radius * np.sin(2.0 * np.pi * u2)
        h_sq = 0.5 * est.estimate_var * (z1 * z1 + z2 * z2)
        vals = np.log2(1.0 + np.outer(h_sq, gain_scale)) @ lengths / n
        total += float(vals.sum())
        total_sq += float(np.dot(vals, vals))
        done += m
        j += 1
    mean = total / samples
    if samples == 1:
        return mean, 0.0
    var = max(total_sq / samples - mean * mean, 0.0) * samples / (samples - 1)
    return mean, math.sqrt(var / samples)
