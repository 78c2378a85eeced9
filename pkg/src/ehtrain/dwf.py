"""Directional water-filling (DWF) over a block or a suffix of it.

The DWF allocation is the greatest convex minorant of the cumulative-energy
staircase ``(k, C_k)``, ``C_k = E_0 + ... + E_{k-1}``: starting from a point,
the next breakpoint is the index with the smallest average energy per slot
(largest index on ties). That choice depends only on points to the right, so
the allocations from *every* start form one tree, stored as an array of
next-breakpoint pointers (:class:`SuffixHull`). Any suffix allocation is a
walk along that tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .energy_model import ChannelParams, EnergyProfile


@dataclass(frozen=True)
class PowerAllocation:
    """Piecewise-constant powers: ``powers[m]`` on slots ``(breakpoints[m-1], breakpoints[m]]``.

    ``breakpoints[-1]`` is the last slot of the block and the first interval
    starts after ``start_slot``.
    """

    breakpoints: tuple[int, ...]
    powers: tuple[float, ...]
    start_slot: int

    def __post_init__(self):
        if len(self.breakpoints) != len(self.powers) or not self.breakpoints:
            raise ValueError("breakpoints and powers must be non-empty and of equal length")
        edges = (self.start_slot, *self.breakpoints)
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise ValueError("breakpoints must be strictly increasing past start_slot")

    @property
    def end_slot(self) -> int:
        return self.breakpoints[-1]

    def lengths(self) -> np.ndarray:
        return np.diff(np.array((self.start_slot, *self.breakpoints)))

    def per_slot(self) -> np.ndarray:
        """Power of every slot ``start_slot+1 .. end_slot``."""
        return np.repeat(np.array(self.powers, dtype=float), self.lengths())

    def to_json(self) -> dict:
        return {
            "breakpoints": list(self.breakpoints),
            "powers": list(self.powers),
            "start_slot": self.start_slot,
        }


@dataclass(frozen=True)
class TrainingDecision:
    """Training stage of ``n_t`` slots.

    Slots ``1..n_t-1`` spend their arrivals entirely; slot ``n_t`` keeps
    ``e_te`` back for the data stage.
    """

    n_t: int
    training_powers: tuple[float, ...]
    e_te: float
    training_energy_sum: float


class SuffixHull:
    """Next-breakpoint pointers of the DWF allocation from every start index."""

    def __init__(self, profile: EnergyProfile):
        self.profile = profile
        self.n = n = profile.n
        self.cum = profile.cumulative
        self._cum = self.cum.tolist()
        nxt = [n] * (n + 1)
        self._next = nxt
        for a in range(n - 1, -1, -1):
            nxt[a] = self._tangent(a, 0.0)
        self.next = np.array(nxt, dtype=np.int64)
        self.next.setflags(write=False)

    def _tangent(self, start: int, extra: float) -> int:
        # First breakpoint from (start, C_start - extra): walk the chain from
        # start+1 while the average energy per slot does not increase.
        cum, nxt, n = self._cum, self._next, self.n
        base = cum[start]
        u = start + 1
        while u < n:
            w = nxt[u]
            if ((cum[w] - base) + extra) * (u - start) <= ((cum[u] - base) + extra) * (w - start):
                u = w
            else:
                break
        return u

    def tangent(self, start: int, extra: float = 0.0) -> int:
        if not 0 <= start < self.n:
            raise ValueError(f"start slot {start} outside 0..{self.n - 1}")
        return self._tangent(start, float(extra))

    def chain(self, vertex: int) -> list[int]:
        """Breakpoints visited from ``vertex`` (exclusive) up to the block end."""
        out = []
        while vertex < self.n:
            vertex = self._next[vertex]
            out.append(vertex)
        return out

    def allocation(self, start: int, extra: float, slot_duration: float) -> PowerAllocation:
        first = self.tangent(start, extra)
        cum = self._cum
        bps = [first, *self.chain(first)]
        powers = [((cum[first] - cum[start]) + extra) / ((first - start) * slot_duration)]
        prev = first
        for b in bps[1:]:
            powers.append((cum[b] - cum[prev]) / ((b - prev) * slot_duration))
            prev = b
        return PowerAllocation(tuple(bps), tuple(powers), start)


def dwf_allocate(
    profile: EnergyProfile, params: ChannelParams, hull: SuffixHull | None = None
) -> PowerAllocation:
    """DWF over the whole block (no training)."""
    hull = hull or SuffixHull(profile)
    return hull.allocation(0, 0.0, params.slot_duration)


def dwf_suffix(
    profile: EnergyProfile,
    start_slot: int,
    extra_energy: float,
    params: ChannelParams,
    hull: SuffixHull | None = None,
) -> PowerAllocation:
    """DWF over slots ``start_slot+1 .. N`` with ``extra_energy`` added to ``E_{start_slot}``."""
    if not 0 <= start_slot < profile.n:
        raise ValueError(f"start_slot must lie in 0..{profile.n - 1}, got {start_slot}")
    if not extra_energy >= 0:
        raise ValueError("extra_energy must be nonnegative")
    hull = hull or SuffixHull(profile)
    return hull.allocation(start_slot, float(extra_energy), params.slot_duration)


def _min_average_index(cum, start: int, n: int) -> int:
    best = start + 1
    for k in range(start + 2, n + 1):
        if (cum[k] - cum[start]) * (best - start) <= (cum[best] - cum[start]) * (k - start):
            best = k
    return best


def incremental_update(
    base: PowerAllocation,
    profile: EnergyProfile,
    n_t: int,
    params: ChannelParams = ChannelParams(),
) -> PowerAllocation:
    """Data-stage DWF for training length ``n_t``, reusing the full-block allocation.

    The leading breakpoint is recomputed by a minimum-average scan from
    ``n_t``. When ``n_t`` sits strictly inside a base interval that scan can
    stop at an index which is not a base breakpoint; the scan is then repeated
    from there until it lands on one, after which the base allocation is
    reused unchanged (from a base breakpoint the allocation only looks right).
    """
    n = profile.n
    if not 1 <= n_t <= n - 1:
        raise ValueError(f"n_t must lie in 1..{n - 1}, got {n_t}")
    if base.start_slot != 0 or base.end_slot != n:
        raise ValueError("base allocation must cover the whole block from slot 0")
    ts = params.slot_duration
    edges = (0, *base.breakpoints)
    spent = sum((b - a) * p for a, b, p in zip(edges, edges[1:], base.powers)) * ts
    if not math.isclose(spent, profile.total_energy, rel_tol=1e-9, abs_tol=1e-12):
        raise ValueError("base allocation does not exhaust this profile's energy")

    cum = profile.cumulative.tolist()
    base_index = {k: i for i, k in enumerate(base.breakpoints)}
    bps: list[int] = []
    powers: list[float] = []
    cur = n_t
    while True:
        k = _min_average_index(cum, cur, n)
        bps.append(k)
        powers.append((cum[k] - cum[cur]) / ((k - cur) * ts))
        cur = k
        if cur in base_index:  # always true at the block end
            break
    tail = base_index[cur] + 1
    for k, p in zip(base.breakpoints[tail:], base.powers[tail:]):
        if p > powers[-1]:
            bps.append(k)
            powers.append(p)
        else:
            # equal level: fold into the preceding interval
            start = bps[-2] if len(bps) > 1 else n_t
            bps[-1] = k
            powers[-1] = (cum[k] - cum[start]) / ((k - start) * ts)
    return PowerAllocation(tuple(bps), tuple(powers), n_t)


def training_split(
    profile: EnergyProfile, n_t: int, e_te: float, params: ChannelParams
) -> TrainingDecision:
    """Training powers under the exhaust rule, keeping ``e_te`` back at slot ``n_t``."""
    n = profile.n
    if not 1 <= n_t <= n - 1:
        raise ValueError(f"n_t must lie in 1..{n - 1}, got {n_t}")
    last = float(profile.energies[n_t - 1])
    if not 0.0 <= e_te <= last:
        raise ValueError(f"e_te must lie in [0, {last}] (arrival of slot {n_t}), got {e_te}")
    ts = params.slot_duration
    powers = [float(e) / ts for e in profile.energies[: n_t - 1]]
    powers.append((last - e_te) / ts)
    return TrainingDecision(
        n_t=n_t,
        training_powers=tuple(powers),
        e_te=float(e_te),
        training_energy_sum=float(profile.cumulative[n_t]) - e_te,
    )
