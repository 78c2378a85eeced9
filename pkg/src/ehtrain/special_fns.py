"""Exponential integral E1 and the overflow-free scaled form exp(x) * E1(x).

Two evaluation routes share one algorithm:

* ``x <= 1``: power series  -gamma - ln x + sum_{k>=1} (-1)^(k+1) x^k / (k k!)
* ``x > 1``: modified Lentz evaluation of the continued fraction

      exp(x) E1(x) = 1/(x+1- 1/(x+3- 4/(x+5- ...)))

  which yields the scaled value directly, so ``exp(x)`` is never formed.

The scalar functions (:func:`e1`, :func:`exp_e1`) serve single calls; the
throughput model evaluates whole batches through :func:`exp_e1_array`.
"""

from __future__ import annotations

import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061
SERIES_TOL = 1e-16
# |delta - 1| cannot drop below one ulp of 1.0
CF_TOL = float(np.finfo(float).eps)
MAX_ITER = 500
_TINY = 1e-300
_CF_CHUNK = 8192
# below this size per-element Python loops beat array passes
_SMALL = 32


class ConvergenceError(ArithmeticError):
    """Raised when a series or continued fraction exhausts MAX_ITER."""


def _check_domain(x: float) -> float:
    x = float(x)
    if not x > 0.0:
        raise ValueError(f"argument must be > 0, got {x!r}")
    return x


def _series_e1(x: float) -> float:
    return _series_sum(x, -EULER_GAMMA - math.log(x))


def _series_sum(x: float, total: float) -> float:
    fact = 1.0
    for k in range(1, MAX_ITER + 1):
        fact = fact * (-x / k)
        term = -fact / k
        total = total + term
        if abs(term) < abs(total) * SERIES_TOL:
            return total
    raise ConvergenceError(f"E1 series did not converge for x={x!r}")


def _cf_exp_e1(x: float) -> float:
    b = x + 1.0
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER + 1):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h = h * delta
        if abs(delta - 1.0) <= CF_TOL:
            return h
    raise ConvergenceError(f"E1 continued fraction did not converge for x={x!r}")


def e1(x: float) -> float:
    """E1(x) = integral_x^inf exp(-t)/t dt for x > 0.

    Underflows gracefully to 0.0 once exp(-x) leaves the double range
    (roughly x > 745).
    """
    x = _check_domain(x)
    if x <= 1.0:
        return _series_e1(x)
    return _cf_exp_e1(x) * math.exp(-x)


def exp_e1(x: float) -> float:
    """exp(x) * E1(x) for x > 0, without forming exp(x)."""
    x = _check_domain(x)
    if x <= 1.0:
        return math.exp(x) * _series_e1(x)
    return _cf_exp_e1(x)


def exp_e1_array(x) -> np.ndarray:
    """Vectorised :func:`exp_e1`; every element must be > 0.

    Elements are frozen individually once converged, so the value returned
    for an element does not depend on the rest of the batch.
    """
    x = np.ascontiguousarray(x, dtype=float)
    if x.size and not np.all(x > 0.0):
        raise ValueError("all arguments must be > 0")
    if x.size <= _SMALL:
        return _exp_e1_small(x)
    out = np.empty_like(x)
    small = x <= 1.0
    if np.any(small):
        xs = x[small]
        out[small] = _exp_list(xs) * _series_e1_array(xs)
    if not np.all(small):
        out[~small] = _cf_sorted_chunks(x[~small])
    return out


def _exp_e1_small(x: np.ndarray) -> np.ndarray:
    # Same operations as the array routes, element by element.
    out = np.empty_like(x)
    flat = x.reshape(-1)
    res = out.reshape(-1)
    small = flat <= 1.0
    if small.any():
        xs = flat[small]
        sums = np.array([_series_e1(v) for v in xs.tolist()])
        res[small] = _exp_list(xs) * sums
    for i in np.flatnonzero(~small).tolist():
        res[i] = _cf_exp_e1(float(flat[i]))
    return out


def _exp_list(x: np.ndarray) -> np.ndarray:
    # math.exp/math.log per element keep every route equal to the scalar one
    return np.array([math.exp(v) for v in x.tolist()])


def _cf_sorted_chunks(x: np.ndarray) -> np.ndarray:
    # Iteration count falls with x; sorting lets each chunk stop early.
    if x.size <= _CF_CHUNK:
        return _cf_exp_e1_array(x)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    out = np.empty_like(x)
    for start in range(0, xs.size, _CF_CHUNK):
        out[order[start:start + _CF_CHUNK]] = _cf_exp_e1_array(xs[start:start + _CF_CHUNK])
    return out


def _series_e1_array(x: np.ndarray) -> np.ndarray:
    total = np.array([-EULER_GAMMA - math.log(v) for v in x.tolist()])
    fact = np.ones_like(x)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, MAX_ITER + 1):
        fact = fact * (-x / k)
        term = -fact / k
        total = np.where(active, total + term, total)
        active &= ~(np.abs(term) < np.abs(total) * SERIES_TOL)
        if not active.any():
            return total
    raise ConvergenceError("E1 series did not converge")


def _cf_exp_e1_array(x: np.ndarray) -> np.ndarray:
    b = x + 1.0
    c = np.full_like(x, 1.0 / _TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, MAX_ITER + 1):
        an = -float(i * i)
        b = b + 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h = np.where(active, h * delta, h)
        active &= ~(np.abs(delta - 1.0) <= CF_TOL)
        if not active.any():
            return h
    raise ConvergenceError("E1 continued fraction did not converge")
