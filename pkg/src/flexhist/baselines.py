"""Competing private mechanisms the benchmark compares against.

Five classics: the exponential mechanism over the output range, stable-value
propose-test-release, smooth-sensitivity calibrated Laplace noise, the
stability-based sanitized histogram (per-bar noise with suppression below a
threshold), and the choosing-based sanitizer that repeatedly picks tall bars
privately.  None of these provides a flexible-accuracy guarantee; the
benchmark scores them with the same flexible-error routine for comparison.

Local/smooth sensitivity conventions: a histogram with an undefined
statistic is never used as a reference point, and neighbors where the
statistic is undefined are skipped when measuring the statistic's local
swing (there is no number to take a difference with).  The propose-test
stability radius, by contrast, treats "one more removal makes the statistic
undefined" as instability — releasing an exact answer there is clearly not
stable.  Both conventions are pinned by the brute-force oracles in the test
suite.
"""

from __future__ import annotations

import enum
import math
from functools import lru_cache

import numpy as np

from .hist import (
    DomainError,
    Histogram,
    ParameterError,
    StatisticKind,
    UndefinedStatisticError,
    eval_statistic,
)
from .mechanisms import UNDEFINED, RngStream


class BaselineKind(enum.Enum):
    Exponential = "exponential"
    PTR = "ptr"
    SmoothSensitivity = "smooth_sensitivity"
    BNSHistogram = "bns_histogram"
    SanPoints = "sanpoints"


def _range_bound(x: Histogram) -> int:
    b = x.space.bound
    if math.isinf(b):
        raise DomainError("baseline mechanisms need a bounded 1-D ground set")
    if x.space.dimension != 1:
        raise DomainError("baseline mechanisms are 1-D only")
    return int(b)


def _counts_vector(x: Histogram) -> np.ndarray:
    c = np.zeros(_range_bound(x), dtype=np.int64)
    for g, n in x.items():
        c[g[0]] = n
    return c


def _stat_or_none(kind: StatisticKind, x: Histogram):
    try:
        return eval_statistic(kind, x)
    except UndefinedStatisticError:
        return None


# ---------------------------------------------------------------------------
# exponential mechanism


def exp_mech(kind: StatisticKind, x: Histogram, eps: float, rng: RngStream) -> int:
    """Sample r in [0,B) with weight exp(-eps*|f(x)-r| / (2B)).

    The error utility swings by up to the full range across neighbors for
    these statistics, so the sensitivity in the exponent is B — which is
    exactly why this mechanism flattens toward uniform on wide ranges.
    """
    bound = _range_bound(x)
    f = _stat_or_none(kind, x)
    if f is None:
        return int(rng.integers(0, bound))
    r = np.arange(bound)
    w = np.exp(-eps * np.abs(f - r) / (2.0 * bound))
    return int(rng.choice_weighted(w))


# ---------------------------------------------------------------------------
# propose-test-release (stable values)


def ptr_stability_radius(kind: StatisticKind, x: Histogram) -> int:
    """Exact distance to the nearest histogram whose statistic is unstable.

    One step = add or remove one element; "unstable" means a single step
    changes the statistic or makes it undefined.
    """
    c = _counts_vector(x)
    bound = len(c)
    f = eval_statistic(kind, x)
    if kind.name == "max":
        # anything below the top bucket is one addition away from changing
        if f < bound - 1:
            return 0
        return int(c[f]) - 1
    if kind.name == "maxk":
        k = kind.k
        r = int(c[f]) - k  # removals until one more disqualifies the bar
        above = c[f + 1:]
        if len(above):
            r = min(r, int((k - 1 - above).min()))  # additions until a bar is one short
        return r
    if kind.name == "mode":
        b = f
        gaps = []
        if b > 0:
            gaps.append(int((c[b] - 1 - c[:b]).min()))
        if b < bound - 1:
            gaps.append(int((c[b] - c[b + 1:]).min()))
        gaps.append(x.size - 1)  # shrink to a singleton: one removal then empties
        return max(0, min(gaps))
    raise ParameterError(f"no stability radius for {kind}")


def ptr_mech(kind: StatisticKind, x: Histogram, eps: float, delta: float,
             rng: RngStream) -> int:
    """Release the exact statistic if the noisy stability radius clears
    ln(1/delta)/eps, otherwise a uniformly random value from the range."""
    bound = _range_bound(x)
    f = _stat_or_none(kind, x)
    if f is not None:
        noisy = ptr_stability_radius(kind, x) + rng.laplace(1.0 / eps)
        if noisy > math.log(1.0 / delta) / eps:
            return int(f)
    return int(rng.integers(0, bound))


# ---------------------------------------------------------------------------
# smooth sensitivity
#
# SS(x) = max over histograms y (statistic defined) of swing(y)*e^{-beta*d},
# d = edit distance from x.  Each statistic admits a complete enumeration of
# "one step from here changes the answer by v" configurations together with
# the cheapest edit sequence reaching them; the maxima below range over
# those canonical events.  Exactness is pinned against brute-force search
# over tiny domains in the test suite.


def _ss_max(c: np.ndarray, beta: float) -> float:
    bound = len(c)
    idx = np.arange(bound)
    above = np.concatenate([np.cumsum(c[::-1])[::-1][1:], [0]])  # elements above T
    plant = (c == 0).astype(np.int64)
    # one addition at the top bucket swings the max from T to B-1
    best = float(((bound - 1 - idx) * np.exp(-beta * (above + plant))).max())
    # removal swing: top at T with a single copy, next occupied bar at N
    base = above + np.where(c >= 1, c - 1, 1)
    cum = np.cumsum(c)
    for t in range(1, bound):
        n = np.arange(t)
        between = cum[t - 1] - cum[n]  # elements strictly inside (N, T)
        cost = base[t] + between + plant[n]
        best = max(best, float(((t - n) * np.exp(-beta * cost)).max()))
    return best


def _ss_maxk(c: np.ndarray, k: int, beta: float) -> float:
    bound = len(c)
    qual = c >= k
    elimc = np.where(qual, c - k + 1, 0)  # per-bar cost to push below k
    e_above = np.concatenate([np.cumsum(elimc[::-1])[::-1][1:], [0]])
    e_cum = np.cumsum(elimc)
    make_b = np.clip(k - c, 0, None)  # raise bar b to qualify
    exact_b = np.abs(c - k)           # pin bar b at exactly k
    best = 0.0
    for b in range(bound):
        if b + 1 < bound:
            # addition swing: bar g one short of qualifying, so maxk jumps b -> g;
            # bars disqualified above b land on k-1 and are free targets
            g = np.arange(b + 1, bound)
            lift = np.where(qual[g], 0, k - 1 - c[g])
            cost = e_above[b] + make_b[b] + lift
            best = max(best, float(((g - b) * np.exp(-beta * cost)).max()))
        if b > 0:
            # removal swing: bar b at exactly k, next qualifying bar at p
            p = np.arange(b)
            between = e_cum[b - 1] - e_cum[p]
            lift_p = np.clip(k - c[p], 0, None)
            cost = e_above[b] + exact_b[b] + between + lift_p
            best = max(best, float(((b - p) * np.exp(-beta * cost)).max()))
    return best


def _ss_mode(c: np.ndarray, beta: float) -> float:
    bound = len(c)
    idx = np.arange(bound)
    hs = np.unique(c)
    hs = np.unique(np.concatenate([hs, hs + 1, hs + 2, [1]]))
    hs = hs[hs >= 1]
    best = 0.0
    for b in range(bound):
        left = idx < b
        for h in hs:
            # mode pinned at bar b with height h; challenger i one step from
            # taking over (ties break toward smaller bars)
            cap = np.where(left, h - 1, h)
            trims = np.clip(c - cap, 0, None)
            trims[b] = 0
            base = trims.sum() + abs(int(c[b]) - int(h))
            cost = base - trims + np.abs(c - cap)  # swap bar i's trim for its exact target
            vals = np.abs(idx - b) * np.exp(-beta * cost)
            vals[b] = 0.0
            best = max(best, float(vals.max()))
    return best


@lru_cache(maxsize=512)
def _ss_cached(key, kind_name: str, k, beta: float, bound: int) -> float:
    c = np.zeros(bound, dtype=np.int64)
    for g, n in key:
        c[g] = n
    if kind_name == "max":
        return _ss_max(c, beta)
    if kind_name == "maxk":
        return _ss_maxk(c, k, beta)
    if kind_name == "mode":
        return _ss_mode(c, beta)
    raise ParameterError(f"no smooth-sensitivity routine for {kind_name}")


def smooth_sensitivity(kind: StatisticKind, x: Histogram, beta: float) -> float:
    if beta <= 0:
        raise ParameterError("beta must be positive")
    key = tuple((g[0], n) for g, n in x.items())
    return _ss_cached(key, kind.name, kind.k, beta, _range_bound(x))


def ss_mech(kind: StatisticKind, x: Histogram, eps: float, delta: float,
            rng: RngStream) -> float:
    """f(x) plus Laplace noise scaled by the smooth sensitivity at
    beta = eps / (2 ln(2/delta))."""
    f = _stat_or_none(kind, x)
    if f is None:
        return float(rng.integers(0, _range_bound(x)))
    beta = eps / (2.0 * math.log(2.0 / delta))
    ss = smooth_sensitivity(kind, x, beta)
    return float(f) + (2.0 * ss / eps) * rng.laplace(1.0)


# ---------------------------------------------------------------------------
# stability-based sanitized histogram


def bns_hist(x: Histogram, eps: float, delta: float, rng: RngStream) -> Histogram:
    """Per-bar Laplace(2/eps) on occupied bars, suppressed below the
    stability threshold 1 + 2 ln(2/delta)/eps; empty bars are never touched,
    so the output support is a subset of the input support."""
    thr = 1.0 + 2.0 * math.log(2.0 / delta) / eps
    out: dict[tuple, int] = {}
    for g, n in x.items():
        v = n + rng.laplace(2.0 / eps)
        if v > thr:
            out[g] = round(v)
    return Histogram(out, x.space)


# ---------------------------------------------------------------------------
# choosing-based sanitizer (iterative tall-bar picking)


def sanpoints(x: Histogram, eps: float, delta: float, k_rounds: int,
              rng: RngStream) -> Histogram:
    """k_rounds iterations of: pick a remaining bar with weight
    exp(eps' * height / 2) (eps' = eps/(2*k_rounds), height sensitivity 1)
    without replacement, then report its height plus Laplace(2*k_rounds/eps),
    clamped at zero and rounded.  Unchosen bars are reported as zero.

    This follows a prose sketch only; treat its benchmark rows as an
    approximate reproduction.
    """
    del delta  # budget is pure eps: half selection, half noise
    if k_rounds < 1:
        raise ParameterError("k_rounds must be >= 1")
    if len(x) == 0:
        return Histogram({}, x.space)
    if k_rounds > len(x):
        raise ParameterError(f"k_rounds = {k_rounds} exceeds {len(x)} occupied bars")
    remaining = dict(x.items())
    eps_round = eps / (2.0 * k_rounds)
    out: dict[tuple, int] = {}
    for _ in range(k_rounds):
        pts = sorted(remaining)
        heights = np.array([remaining[g] for g in pts], dtype=float)
        w = np.exp(eps_round * (heights - heights.max()) / 2.0)
        g = pts[rng.choice_weighted(w)]
        out[g] = max(0, round(remaining.pop(g) + rng.laplace(2.0 * k_rounds / eps)))
    return Histogram(out, x.space)


# ---------------------------------------------------------------------------
# statistic wrappers used by the benchmark


def bns_mech(kind: StatisticKind, x: Histogram, eps: float, delta: float,
             rng: RngStream):
    released = bns_hist(x, eps, delta, rng)
    v = _stat_or_none(kind, released)
    return UNDEFINED if v is None else v


def sanpoints_mech(kind: StatisticKind, x: Histogram, eps: float, delta: float,
                   rng: RngStream, k_rounds: int = 8):
    released = sanpoints(x, eps, delta, min(k_rounds, max(1, len(x))), rng)
    v = _stat_or_none(kind, released)
    return UNDEFINED if v is None else v
