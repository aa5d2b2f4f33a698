"""Bessel functions of the first kind and their positive zeros.

Values come from the ascending series for small arguments and from Miller's
backward recurrence (normalised with J_0 + 2*sum J_2k = 1) otherwise.  Zeros of
J_0 start from McMahon's expansion; zeros of J_m, m >= 1, are bracketed by the
interlacing j_{m-1,k} < j_{m,k} < j_{m-1,k+1} and polished by safeguarded
Newton iterations.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .errors import RangeError

MAX_ORDER = 60
MAX_ZERO_INDEX = 200

_SERIES_LIMIT = 2.0
_RESCALE = 1e250


def _series(orders, x):
    """Ascending series for J_m(x), x < 2; returns array (len(orders), len(x))."""
    out = np.empty((len(orders), x.size))
    half = 0.5 * x
    q = -(half * half)
    for row, m in enumerate(orders):
        am = abs(m)
        with np.errstate(divide="ignore"):
            lead = np.where(
                half > 0.0,
                np.exp(am * np.log(np.where(half > 0.0, half, 1.0)) - math.lgamma(am + 1)),
                1.0 if am == 0 else 0.0,
            )
        term = lead.copy()
        total = lead.copy()
        for s in range(1, 40):
            term = term * q / (s * (s + am))
            total += term
        if m < 0 and am % 2 == 1:
            total = -total
        out[row] = total
    return out


def _miller(orders, x):
    """Backward recurrence for J_m(x), x >= 2; same layout as `_series`."""
    top = max(abs(m) for m in orders)
    scale = max(top, float(x.max()))
    start = int(scale + 30 + 6 * math.sqrt(scale))
    start += start % 2
    rows = {}
    for i, m in enumerate(orders):
        rows.setdefault(abs(m), []).append(i)
    rec = np.zeros((len(orders), x.size))
    upper = np.zeros_like(x)
    cur = np.full_like(x, 1e-30)
    even_sum = np.zeros_like(x)
    inv = 2.0 / x
    for k in range(start, 0, -1):
        # cur holds j_k, upper holds j_{k+1}
        for i in rows.get(k, ()):
            rec[i] = cur
        if k % 2 == 0:
            even_sum += cur
        upper, cur = cur, k * inv * cur - upper
        big = np.abs(cur) > _RESCALE
        if big.any():
            f = np.where(big, 1.0 / _RESCALE, 1.0)
            cur *= f
            upper *= f
            even_sum *= f
            rec *= f
    for i in rows.get(0, ()):
        rec[i] = cur
    out = rec / (cur + 2.0 * even_sum)
    for row, m in enumerate(orders):
        if m < 0 and (-m) % 2 == 1:
            out[row] = -out[row]
    return out


def bessel_j_orders(orders, x):
    """Evaluate J_m(x) for each m in `orders` (negative m allowed) at x >= 0.

    Returns an array of shape (len(orders),) + x.shape.
    """
    x = np.asarray(x, dtype=float)
    flat = np.abs(x.ravel())
    sign_x = np.sign(x.ravel())
    orders = [int(m) for m in orders]
    out = np.empty((len(orders), flat.size))
    small = flat < _SERIES_LIMIT
    if small.any():
        out[:, small] = _series(orders, flat[small])
    if (~small).any():
        out[:, ~small] = _miller(orders, flat[~small])
    # J_m(-x) = (-1)^m J_m(x)
    neg = sign_x < 0
    if neg.any():
        for row, m in enumerate(orders):
            if m % 2:
                out[row, neg] = -out[row, neg]
    return out.reshape((len(orders),) + x.shape)


def bessel_j(m, x):
    """J_m(x) for integer order m and array-like x."""
    return bessel_j_orders([m], x)[0]


def _mcmahon(m, k):
    beta = (k + 0.5 * m - 0.25) * math.pi
    mu = 4.0 * m * m
    b8 = 8.0 * beta
    return (beta - (mu - 1.0) / b8
            - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * b8 ** 3))


def _polish(m, x, lo=None, hi=None):
    """Safeguarded Newton on J_m, vectorised over independent zeros."""
    x = np.array(x, dtype=float)
    sign_lo = None if lo is None else np.sign(bessel_j(m, lo))
    extra = None
    settled = np.zeros(x.shape, dtype=bool)
    for _ in range(100):
        jm1, jm = bessel_j_orders([m - 1, m], x)
        new = x - jm / (jm1 - (m / x) * jm)
        newton = np.ones(x.shape, dtype=bool)
        if lo is not None:
            same = np.sign(jm) == sign_lo
            lo = np.where(same, x, lo)
            hi = np.where(same, hi, x)
            outside = ~((new >= lo) & (new <= hi))
            new = np.where(outside, 0.5 * (lo + hi), new)
            newton = ~outside
        step = np.abs(new - x)
        x = new
        if extra is not None:
            extra -= 1
            if extra == 0:
                break
        settled |= newton & (step <= 1e-10 * np.maximum(1.0, x))
        if extra is None and settled.all():
            # quadratic convergence: two more steps reach rounding level
            extra = 2
    return x


# Tables are built per tier: order m holds TIER - m zeros, so the recursion
# m -> m-1 always hits the same cache entries and results never depend on
# the order in which callers asked for them.
_TIERS = (72, 140, MAX_ZERO_INDEX + MAX_ORDER + 1)


@lru_cache(maxsize=None)
def _zeros(m, tier):
    """First `tier - m` positive zeros of J_m as a read-only array."""
    count = tier - m
    if m == 0:
        guess = np.array([_mcmahon(0, k) for k in range(1, count + 1)])
        z = _polish(0, guess)
    else:
        prev = _zeros(m - 1, tier)
        lo, hi = prev[:count].copy(), prev[1:count + 1].copy()
        guess = np.array([_mcmahon(m, k) for k in range(1, count + 1)])
        inside = (guess > lo) & (guess < hi)
        guess = np.where(inside, guess, 0.5 * (lo + hi))
        z = _polish(m, guess, lo, hi)
    z.setflags(write=False)
    return z


def bessel_zeros(m, count):
    """The first `count` positive zeros j_{m,1..count} of J_m."""
    if not (0 <= m <= MAX_ORDER) or not (1 <= count <= MAX_ZERO_INDEX):
        raise RangeError(f"zero table covers 0<=m<={MAX_ORDER}, 1<=k<={MAX_ZERO_INDEX}; "
                         f"got m={m}, count={count}")
    tier = next(t for t in _TIERS if t - m >= count)
    return np.array(_zeros(m, tier)[:count])


def bessel_zero(m, k):
    """k-th positive zero of J_m (k counts from 1)."""
    if not (0 <= m <= MAX_ORDER) or not (1 <= k <= MAX_ZERO_INDEX):
        raise RangeError(f"bessel_zero table covers 0<=m<={MAX_ORDER}, "
                         f"1<=k<={MAX_ZERO_INDEX}; got ({m}, {k})")
    return float(bessel_zeros(m, k)[k - 1])
