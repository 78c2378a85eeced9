"""Independent reference implementations used only by the tests."""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

# Above this many units of e^-x the integrands below are exactly 0 in double.
_CUTOFF = 750.0


def quad_exp_e1(x: float) -> float:
    """``e^x E1(x) = int_0^inf exp(-x (e^v - 1)) dv`` (substitution ``t = x e^v``)."""
    upper = math.log1p(_CUTOFF / x)
    val, _ = quad(lambda v: math.exp(-x * math.expm1(v)), 0.0, upper,
                  epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def quad_e1(x: float) -> float:
    """``E1(x) = int_{ln x}^inf exp(-e^s) ds`` (substitution ``t = e^s``)."""
    a = math.log(x)
    val, _ = quad(lambda s: math.exp(-math.exp(s)), a, a + math.log1p(_CUTOFF / x),
                  epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def grid_dwf(energies, step: float = 0.01):
    """Brute-force maximiser of ``sum log(1 + P_i)`` under energy neutrality.

    Energies are integers on the ``step`` grid; the program is solved exactly
    on that grid by dynamic programming over cumulative spent energy.
    Returns the per-slot powers.
    """
    units = [int(round(e / step)) for e in energies]
    n = len(units)
    cum = np.concatenate([[0], np.cumsum(units)])
    total = int(cum[-1])
    size = total + 1
    gain = np.log1p(np.arange(size) * step)
    # value[s] = best objective of slots 1..l having spent s units
    value = np.full(size, -np.inf)
    value[0] = 0.0
    choice = []
    for l in range(1, n + 1):
        cap = int(cum[l])
        spent_new = np.arange(size)[:, None]
        spent_old = np.arange(size)[None, :]
        delta = spent_new - spent_old
        cand = np.where(delta >= 0, value[None, :] + gain[np.clip(delta, 0, total)], -np.inf)
        cand[cap + 1:, :] = -np.inf
        arg = np.argmax(cand, axis=1)
        value = cand[np.arange(size), arg]
        choice.append(arg)
    # every unit must be spent by the end (terminal equality)
    s = total
    powers = []
    for l in range(n, 0, -1):
        prev = int(choice[l - 1][s])
        powers.append((s - prev) * step)
        s = prev
    return powers[::-1]


def prefix_check(energies, per_slot, slot_duration=1.0):
    """Plain-loop prefix sums: returns the list of ``(spent_l, available_l)``."""
    out = []
    spent = avail = 0.0
    for e, p in zip(energies, per_slot):
        avail += e
        spent += p * slot_duration
        out.append((spent, avail))
    return out
