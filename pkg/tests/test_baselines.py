"""Baseline mechanisms, pinned against brute-force oracles on tiny domains."""

import itertools
import math
import random
from collections import deque

import numpy as np
import pytest
import scipy.stats

from flexhist.baselines import (
    BaselineKind,
    bns_hist,
    bns_mech,
    exp_mech,
    ptr_mech,
    ptr_stability_radius,
    sanpoints,
    sanpoints_mech,
    smooth_sensitivity,
    ss_mech,
)
from flexhist.hist import (
    MAX,
    MODE,
    DomainError,
    Histogram,
    MetricSpace,
    ParameterError,
    maxk,
)
from flexhist.mechanisms import UNDEFINED, RngStream

B100 = MetricSpace(1, 100.0)


def tiny_hist(counts):
    """Histogram over [0,len(counts)) from a dense counts vector."""
    space = MetricSpace(1, float(len(counts)))
    return Histogram({i: v for i, v in enumerate(counts) if v}, space)


def _stat_c(kind, c):
    """Statistic of a dense counts vector; None when undefined.

    Independent of the library: plain list scans, ties toward smaller bars.
    """
    if kind.name == "max":
        occupied = [i for i, v in enumerate(c) if v > 0]
        return occupied[-1] if occupied else None
    if kind.name == "maxk":
        qualified = [i for i, v in enumerate(c) if v >= kind.k]
        return qualified[-1] if qualified else None
    if kind.name == "mode":
        m = max(c)
        return c.index(m) if m > 0 else None
    raise AssertionError(kind)


# ---------------------------------------------------------------------------
# exponential mechanism


def test_exp_mech_matches_closed_form_distribution():
    # bound 4, f = 2, eps = 2: weights e^{-|2-r|/4}, frozen normalisation
    x = tiny_hist([0, 0, 1, 0])
    expected = np.array([
        0.19168941637660356,
        0.24613408273759835,
        0.3160424181481998,
        0.24613408273759835,
    ])
    n = 30000
    rng = RngStream(1111)
    tally = np.zeros(4, dtype=int)
    for _ in range(n):
        tally[exp_mech(MAX, x, 2.0, rng)] += 1
    assert scipy.stats.chisquare(tally, expected * n).pvalue > 1e-3


def test_exp_mech_uniform_at_eps_zero():
    x = tiny_hist([0, 0, 1, 0])
    n = 20000
    rng = RngStream(22)
    tally = np.zeros(4, dtype=int)
    for _ in range(n):
        tally[exp_mech(MAX, x, 0.0, rng)] += 1
    assert scipy.stats.chisquare(tally).pvalue > 1e-3


def test_exp_mech_undefined_statistic_falls_back_to_uniform_draw():
    x = tiny_hist([0, 0, 1, 0])
    rng = RngStream(5)
    draws = {exp_mech(maxk(5), x, 2.0, rng) for _ in range(200)}
    assert draws <= set(range(4))
    assert len(draws) > 1


def test_exp_mech_needs_bounded_domain():
    x = Histogram({2: 1}, MetricSpace(1))
    with pytest.raises(DomainError):
        exp_mech(MAX, x, 1.0, RngStream(0))


# ---------------------------------------------------------------------------
# propose-test-release


def _unstable(kind, c):
    """One add/remove step from c changes the statistic or undefines it."""
    f = _stat_c(kind, c)
    if f is None:
        return False
    for i in range(len(c)):
        for dv in (1, -1):
            if dv < 0 and c[i] == 0:
                continue
            z = list(c)
            z[i] += dv
            if _stat_c(kind, tuple(z)) != f:
                return True
    return False


def _radius_bfs(kind, c0):
    """Shortest edit distance from c0 to an unstable counts vector."""
    cap = max(c0) + 3  # instability events never need counts above max+1
    seen = {c0}
    queue = deque([(c0, 0)])
    while queue:
        c, d = queue.popleft()
        if _unstable(kind, c):
            return d
        for i in range(len(c)):
            for dv in (1, -1):
                v = c[i] + dv
                if not 0 <= v <= cap:
                    continue
                z = c[:i] + (v,) + c[i + 1:]
                if z not in seen:
                    seen.add(z)
                    queue.append((z, d + 1))
    raise AssertionError("no unstable state reachable")


def test_ptr_radius_examples():
    assert ptr_stability_radius(MAX, tiny_hist([0, 0, 0, 5])) == 4
    assert ptr_stability_radius(MAX, tiny_hist([0, 0, 5, 0])) == 0
    assert ptr_stability_radius(maxk(2), tiny_hist([0, 4, 0, 1])) == 0
    assert ptr_stability_radius(maxk(2), tiny_hist([0, 4, 0, 0])) == 1
    assert ptr_stability_radius(MODE, tiny_hist([3, 3, 0, 0])) == 0
    x = Histogram({3: 50}, B100)
    assert ptr_stability_radius(MODE, x) == 49


def test_ptr_radius_matches_bfs_oracle():
    rng = random.Random(4242)
    checked = 0
    while checked < 150:
        bound = rng.choice((3, 4))
        c = tuple(rng.randint(0, 5) for _ in range(bound))
        kind = rng.choice((MAX, maxk(rng.randint(1, 3)), MODE))
        if _stat_c(kind, c) is None:
            continue
        lib = ptr_stability_radius(kind, tiny_hist(c) if any(c) else None)
        assert lib == _radius_bfs(kind, c), (kind, c)
        checked += 1


def test_ptr_mech_releases_exactly_when_stable():
    x = Histogram({3: 50}, B100)  # mode radius 49 >> ln(1/delta)/eps
    rng = RngStream(404)
    assert all(ptr_mech(MODE, x, 1.0, 0.01, rng) == 3 for _ in range(200))


def test_ptr_mech_randomises_when_unstable():
    x = Histogram({3: 50}, B100)  # max below the top bucket: radius 0
    rng = RngStream(405)
    out = [ptr_mech(MAX, x, 1.0, 0.01, rng) for _ in range(3000)]
    assert all(0 <= v < 100 for v in out)
    # exact release needs Lap(1) > ln(100): expect ~1.5% hits of the true value
    assert out.count(3) / len(out) < 0.05
    assert len(set(out)) > 50


def test_ptr_mech_undefined_statistic_randomises():
    x = Histogram({3: 50}, B100)
    rng = RngStream(7)
    out = {ptr_mech(maxk(60), x, 1.0, 0.01, rng) for _ in range(100)}
    assert out <= set(range(100)) and len(out) > 1


def test_ptr_radius_unsupported_statistic():
    from flexhist.hist import SUPPORT

    with pytest.raises(ParameterError):
        ptr_stability_radius(SUPPORT, tiny_hist([1, 0, 0]))


# ---------------------------------------------------------------------------
# smooth sensitivity


def _local_swing(kind, c):
    """Largest one-step statistic change at c, undefined neighbors skipped."""
    f = _stat_c(kind, c)
    ls = 0
    for i in range(len(c)):
        for dv in (1, -1):
            if dv < 0 and c[i] == 0:
                continue
            z = list(c)
            z[i] += dv
            fz = _stat_c(kind, tuple(z))
            if fz is not None:
                ls = max(ls, abs(fz - f))
    return ls


def _ss_brute(kind, x_counts, beta, cap):
    """sup over capped counts vectors y of swing(y) * e^{-beta * d(x,y)}."""
    bound = len(x_counts)
    best = 0.0
    for c in itertools.product(range(cap + 1), repeat=bound):
        if _stat_c(kind, c) is None:
            continue
        d = sum(abs(a - b) for a, b in zip(c, x_counts))
        w = math.exp(-beta * d)
        if w * (bound - 1) <= best:
            continue
        best = max(best, _local_swing(kind, c) * w)
    return best


def test_smooth_sensitivity_matches_brute_force():
    rng = random.Random(99)
    checked = 0
    while checked < 75:
        c = tuple(rng.randint(0, 4) for _ in range(3))
        kind = (MAX, maxk(rng.randint(1, 3)), MODE)[checked % 3]
        if _stat_c(kind, c) is None:
            continue
        beta = rng.choice((1.0, 1.5))
        cap = max(c) + 12  # mass beyond the cap contributes < 2 e^{-12 beta}
        brute = _ss_brute(kind, c, beta, cap)
        lib = smooth_sensitivity(kind, tiny_hist(c), beta)
        tail = (len(c) - 1) * math.exp(-beta * (cap - max(c)))
        assert brute - 1e-12 <= lib <= brute + tail, (kind, c, beta)
        checked += 1


def test_smooth_sensitivity_dominates_local_swing():
    rng = random.Random(7)
    for _ in range(40):
        c = tuple(rng.randint(0, 5) for _ in range(4))
        if _stat_c(MAX, c) is None:
            continue
        ss = smooth_sensitivity(MAX, tiny_hist(c), 1.0)
        assert ss >= _local_swing(MAX, c) - 1e-12
        assert ss <= len(c) - 1 + 1e-12


def test_smooth_sensitivity_non_increasing_in_beta():
    x = tiny_hist([0, 3, 0, 1, 2])
    vals = [smooth_sensitivity(MAX, x, b) for b in (0.5, 1.0, 2.0, 4.0)]
    assert all(a >= b - 1e-15 for a, b in zip(vals, vals[1:]))


def test_smooth_sensitivity_validation():
    from flexhist.hist import SUPPORT

    with pytest.raises(ParameterError):
        smooth_sensitivity(MAX, tiny_hist([1, 0, 0]), 0.0)
    with pytest.raises(ParameterError):
        smooth_sensitivity(SUPPORT, tiny_hist([1, 0, 0]), 1.0)


def test_ss_mech_centers_on_the_statistic():
    # strongly stable input: smooth sensitivity is tiny, noise stays small
    x = Histogram({3: 80}, B100)
    rng = RngStream(31)
    out = [ss_mech(MODE, x, 1.0, 0.01, rng) for _ in range(100)]
    assert all(abs(v - 3.0) < 30.0 for v in out)
    assert abs(np.mean(out) - 3.0) < 3.0


def test_ss_mech_undefined_statistic_randomises():
    x = Histogram({3: 5}, B100)
    rng = RngStream(8)
    out = {ss_mech(maxk(10), x, 1.0, 0.01, rng) for _ in range(50)}
    assert all(0 <= v < 100 for v in out)
    assert len(out) > 1


# ---------------------------------------------------------------------------
# sanitized histogram


def test_bns_hist_empty_input():
    out = bns_hist(Histogram({}, B100), 1.0, 0.01, RngStream(1))
    assert out.size == 0


def test_bns_hist_suppresses_small_bars():
    # threshold ~30 at delta = 2^-20: count-1 bars essentially never survive
    x = Histogram({1: 1, 40: 1, 77: 1}, B100)
    rng = RngStream(55)
    for _ in range(100):
        assert bns_hist(x, 1.0, 2.0**-20, rng).size == 0


def test_bns_hist_keeps_tall_bars():
    x = Histogram({10: 90, 60: 95}, B100)
    rng = RngStream(56)
    for _ in range(100):
        out = bns_hist(x, 1.0, 2.0**-20, rng)
        got = dict(out.items())
        assert set(got) == {(10,), (60,)}
        assert abs(got[(10,)] - 90) < 40 and abs(got[(60,)] - 95) < 40


def test_bns_hist_support_never_grows():
    x = Histogram({5: 20, 50: 3}, B100)
    rng = RngStream(57)
    for _ in range(200):
        assert bns_hist(x, 0.5, 0.01, rng).support() <= x.support()


# ---------------------------------------------------------------------------
# choosing-based sanitizer


def test_sanpoints_reports_distinct_input_bars():
    x = Histogram({3: 9, 20: 5, 41: 2, 90: 7}, B100)
    rng = RngStream(77)
    for _ in range(50):
        out = sanpoints(x, 1.0, 0.01, 3, rng)
        assert out.support() <= x.support()
        assert len(out) <= 3


def test_sanpoints_empty_input():
    assert sanpoints(Histogram({}, B100), 1.0, 0.01, 2, RngStream(1)).size == 0


def test_sanpoints_round_count_validation():
    x = Histogram({3: 9, 20: 5}, B100)
    with pytest.raises(ParameterError):
        sanpoints(x, 1.0, 0.01, 3, RngStream(1))  # only two occupied bars
    with pytest.raises(ParameterError):
        sanpoints(x, 1.0, 0.01, 0, RngStream(1))


def test_sanpoints_high_eps_recovers_input():
    x = Histogram({3: 9, 20: 5, 41: 2}, B100)
    out = sanpoints(x, 100.0, 0.01, 3, RngStream(88))
    assert out == x  # noise scale 0.06: every rounded height is exact


def test_sanpoints_deterministic_per_seed():
    x = Histogram({3: 9, 20: 5, 41: 2, 90: 7}, B100)
    a = sanpoints(x, 1.0, 0.01, 2, RngStream(3))
    b = sanpoints(x, 1.0, 0.01, 2, RngStream(3))
    assert a == b


# ---------------------------------------------------------------------------
# statistic wrappers


def test_bns_mech_undefined_when_everything_suppressed():
    x = Histogram({1: 1, 40: 1}, B100)
    assert bns_mech(MAX, x, 1.0, 2.0**-20, RngStream(9)) is UNDEFINED


def test_bns_mech_defined_path():
    x = Histogram({10: 90, 60: 95}, B100)
    assert bns_mech(MAX, x, 1.0, 2.0**-20, RngStream(9)) == 60


def test_sanpoints_mech_undefined_statistic():
    x = Histogram({3: 9, 20: 5}, B100)
    assert sanpoints_mech(maxk(10**6), x, 1.0, 0.01, RngStream(9)) is UNDEFINED


def test_sanpoints_mech_caps_rounds_at_occupied_bars():
    x = Histogram({3: 9, 20: 5}, B100)
    out = sanpoints_mech(MAX, x, 50.0, 0.01, RngStream(9), k_rounds=8)
    assert out in (3, 20)


def test_baseline_kind_enum_wiring():
    assert {k.value for k in BaselineKind} == {
        "exponential", "ptr", "smooth_sensitivity", "bns_histogram", "sanpoints"}


def test_all_baselines_deterministic_per_seed():
    x = Histogram({3: 9, 20: 5, 41: 2}, B100)
    for mech in (
        lambda r: exp_mech(MAX, x, 1.0, r),
        lambda r: ptr_mech(MODE, x, 1.0, 0.01, r),
        lambda r: ss_mech(MODE, x, 1.0, 0.01, r),
        lambda r: bns_mech(MAX, x, 1.0, 0.01, r),
        lambda r: sanpoints_mech(MAX, x, 1.0, 0.01, r),
    ):
        assert mech(RngStream(606)) == mech(RngStream(606))
