"""Energy-harvesting profiles, channel parameters and the causal energy constraint.

Slot convention: slots are numbered 1..N. ``E_k`` (k = 0..N-1) becomes usable
at the start of slot k+1, so the energy available up to the end of slot l is
``E_0 + ... + E_{l-1}``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np


class ProfileFormatError(ValueError):
    """A profile file could not be parsed."""


@dataclass(frozen=True)
class ChannelParams:
    sigma_h_sq: float = 1.0
    sigma_sq: float = 1.0
    slot_duration: float = 1.0

    def __post_init__(self):
        for name in ("sigma_h_sq", "sigma_sq", "slot_duration"):
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True, eq=False)
class EnergyProfile:
    """Initial buffer energy plus per-slot harvested energies ``[E_0, ..., E_{N-1}]``.

    The energies are stored as a read-only float array; ``cumulative[l]`` is
    the energy usable by the end of slot ``l``.
    """

    energies: np.ndarray
    cumulative: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        e = np.array(self.energies, dtype=float).ravel()
        if e.size == 0:
            raise ValueError("profile must contain at least one slot")
        if not np.all(np.isfinite(e)) or np.any(e < 0):
            raise ValueError("energies must be finite and nonnegative")
        e.setflags(write=False)
        cum = np.concatenate(([0.0], np.cumsum(e)))
        cum.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "cumulative", cum)

    @property
    def n(self) -> int:
        return self.energies.size

    @property
    def total_energy(self) -> float:
        return float(self.cumulative[-1])

    def __len__(self) -> int:
        return self.n

    def __eq__(self, other):
        if not isinstance(other, EnergyProfile):
            return NotImplemented
        return np.array_equal(self.energies, other.energies)

    def __hash__(self):
        return hash(self.energies.tobytes())

    def to_json(self) -> dict:
        return {"energies": self.energies.tolist()}


@dataclass(frozen=True)
class RngSpec:
    """Address of an independent random stream: ``(seed, stream_index)``.

    Streams come from the counter-based Philox generator keyed through a
    ``SeedSequence`` whose spawn key is the stream index, so every
    ``(seed, stream_index)`` pair yields the same draws on every platform.
    """

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.stream_index < 0:
            raise ValueError("stream_index must be nonnegative")

    def generator(self, *substream: int) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index, *substream))
        return np.random.Generator(np.random.Philox(ss))


def _poisson_by_inversion(u: np.ndarray, lam: float) -> np.ndarray:
    # Sequential CDF walk: k is the smallest integer with F(k) >= u.
    k = np.zeros(u.shape, dtype=np.int64)
    p = math.exp(-lam)
    cdf = p
    pending = u > cdf
    j = 0
    while pending.any():
        j += 1
        p = p * lam / j
        new_cdf = cdf + p
        if new_cdf == cdf:
            # cdf has saturated below u (u within rounding of 1): stop here
            k[pending] = j
            break
        cdf = new_cdf
        k[pending] = j
        pending &= u > cdf
    return k


def generate_poisson_profile(n: int, lambda_e: float, rng: RngSpec) -> EnergyProfile:
    """Draw ``E_0 .. E_{n-1}`` i.i.d. Poisson(``lambda_e``)."""
    if n < 2:
        raise ValueError("a block needs at least 2 slots (training + data)")
    if not lambda_e > 0:
        raise ValueError("lambda_e must be positive")
    u = rng.generator().random(n)
    return EnergyProfile(_poisson_by_inversion(u, lambda_e).astype(float))


def constant_profile(n: int, rate: float) -> EnergyProfile:
    if n < 2:
        raise ValueError("a block needs at least 2 slots (training + data)")
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    return EnergyProfile(np.full(n, float(rate)))


def cumulative_available(profile: EnergyProfile, l: int) -> float:
    """Energy usable by the end of slot ``l``: ``E_0 + ... + E_{l-1}``."""
    if not 0 <= l <= profile.n:
        raise IndexError(f"slot index {l} outside 0..{profile.n}")
    return float(profile.cumulative[l])


def average_eh_rate(profile: EnergyProfile, params: ChannelParams) -> float:
    return profile.total_energy / (profile.n * params.slot_duration)


class NeutralityCheck(NamedTuple):
    ok: bool
    first_violation: int | None


def check_energy_neutral(
    profile: EnergyProfile,
    powers: Sequence[float],
    params: ChannelParams,
    rtol: float = 1e-12,
) -> NeutralityCheck:
    """Check ``T_S * (P_1 + ... + P_l) <= E_0 + ... + E_{l-1}`` for l = 1..N.

    ``rtol`` (relative to the block's total energy) absorbs rounding in
    power values derived by division.
    """
    p = np.asarray(powers, dtype=float)
    if p.shape != (profile.n,):
        raise ValueError(f"expected {profile.n} powers, got shape {p.shape}")
    if np.any(p < 0):
        raise ValueError("powers must be nonnegative")
    used = params.slot_duration * np.cumsum(p)
    slack = rtol * max(profile.total_energy, 1.0)
    bad = np.flatnonzero(used > profile.cumulative[1:] + slack)
    if bad.size:
        return NeutralityCheck(False, int(bad[0]) + 1)
    return NeutralityCheck(True, None)


def load_profile(path: str | Path) -> EnergyProfile:
    """Read a profile from JSON (``{"energies": [...]}``) or CSV (header ``energy``)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
        return _profile_from_json(text, path)
    return _profile_from_csv(text, path)


def _profile_from_json(text: str, path: Path) -> EnergyProfile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProfileFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict) or "energies" not in doc:
        raise ProfileFormatError(f"{path}: missing field 'energies'")
    values = doc["energies"]
    if not isinstance(values, list) or not values:
        raise ProfileFormatError(f"{path}: field 'energies' must be a non-empty list")
    for i, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0 or not math.isfinite(v):
            raise ProfileFormatError(f"{path}: field 'energies'[{i}]: invalid energy {v!r}")
    return EnergyProfile(values)


def _profile_from_csv(text: str, path: Path) -> EnergyProfile:
    rows = list(csv.reader(text.splitlines()))
    if not rows or [c.strip() for c in rows[0]] != ["energy"]:
        raise ProfileFormatError(f"{path}: line 1: expected header 'energy'")
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 1:
            raise ProfileFormatError(f"{path}: line {lineno}: expected one value")
        try:
            v = float(row[0])
        except ValueError:
            raise ProfileFormatError(f"{path}: line {lineno}: not a number: {row[0]!r}") from None
        if v < 0 or not math.isfinite(v):
            raise ProfileFormatError(f"{path}: line {lineno}: invalid energy {v!r}")
        values.append(v)
    if not values:
        raise ProfileFormatError(f"{path}: no energies")
    return EnergyProfile(values)
