"""Input-distortion measures on histograms: drop, move, and their blend.

``drop`` charges the fraction of elements removed and forbids additions;
``move`` charges worst-case per-element displacement between equally sized
histograms; ``drmv`` drops down to the target size and then moves, with the
move term weighted by eta.  The drop count is forced to ``|x| - |y|``, so
the optimisation is only over *which* elements survive; that reduces to a
bipartite feasibility question (can the demands y be met from capacities x
using only edges of length <= t?) and is solved exactly by a threshold
search over pairwise distances, no enumeration of intermediates required.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional, Union

from .hist import (
    DomainError,
    Histogram,
    MetricSpace,
    ParameterError,
    Point,
    PointLike,
    as_point,
)
from .transport import DiscreteDistribution, _FlowNet, winf, winf_lossy_witness


@dataclass(frozen=True)
class DistortionKind:
    """One of drop, move, or the eta-weighted drop-then-move blend."""

    name: str
    eta: Optional[float] = None

    def __post_init__(self) -> None:
        if self.name not in ("drop", "move", "drmv"):
            raise ParameterError(f"unknown distortion {self.name!r}")
        if self.name == "drmv":
            if self.eta is None or self.eta < 0:
                raise ParameterError("drmv needs eta >= 0")
        elif self.eta is not None:
            raise ParameterError(f"{self.name} takes no eta")

    def __str__(self) -> str:
        return self.name if self.eta is None else f"drmv(eta={self.eta:g})"


DROP = DistortionKind("drop")
MOVE = DistortionKind("move")


def drop_move(eta: float) -> DistortionKind:
    return DistortionKind("drmv", eta)


class FractionalHistogram:
    """Histogram with exact rational bar masses (intermediate constructions).

    Mirrors the read API of Histogram (space/size/count/items/support) so the
    distortion functions accept either kind.
    """

    __slots__ = ("_entries", "space")

    def __init__(self, entries: Iterable[tuple[PointLike, Union[int, Fraction]]],
                 space: MetricSpace):
        merged: dict[Point, Fraction] = {}
        for g, m in entries:
            mass = Fraction(m)
            if mass < 0:
                raise DomainError(f"negative bar mass {m!r}")
            if mass == 0:
                continue
            pt = as_point(g, space.dimension)
            merged[pt] = merged.get(pt, Fraction(0)) + mass
        object.__setattr__(self, "_entries", dict(sorted(merged.items())))
        object.__setattr__(self, "space", space)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("FractionalHistogram is immutable")

    @property
    def size(self) -> Fraction:
        return sum(self._entries.values(), Fraction(0))

    def count(self, g: PointLike) -> Fraction:
        return self._entries.get(as_point(g, self.space.dimension), Fraction(0))

    def items(self) -> tuple[tuple[Point, Fraction], ...]:
        return tuple(self._entries.items())

    def support(self) -> frozenset[Point]:
        return frozenset(self._entries)

    def round(self) -> Histogram:
        """Largest-remainder rounding to integer counts, preserving the total.

        Only defined when the total mass is an integer (true for every
        histogram this module constructs, whose size equals a target count).
        """
        total = self.size
        if total.denominator != 1:
            raise DomainError(f"total mass {total} is not an integer")
        floors = {g: int(m) for g, m in self._entries.items()}
        leftover = int(total) - sum(floors.values())
        by_remainder = sorted(self._entries.items(),
                              key=lambda kv: (kv[1] - int(kv[1]), kv[0]), reverse=True)
        for g, _ in by_remainder[:leftover]:
            floors[g] += 1
        return Histogram({g: c for g, c in floors.items() if c > 0}, self.space)

    def __eq__(self, other) -> bool:
        return (isinstance(other, FractionalHistogram)
                and self.space == other.space and self._entries == other._entries)

    def __repr__(self) -> str:
        inner = ", ".join(f"{g}: {m}" for g, m in self._entries.items())
        return f"FractionalHistogram({{{inner}}})"


AnyHistogram = Union[Histogram, FractionalHistogram]


def _normalized(x: AnyHistogram) -> DiscreteDistribution:
    total = x.size
    return DiscreteDistribution([(g, Fraction(m) / total) for g, m in x.items()], x.space)


def drop(x: AnyHistogram, y: AnyHistogram) -> float:
    """Fraction of x's elements removed to reach y; +inf if y adds anywhere."""
    if x.space != y.space:
        raise DomainError("drop across different spaces")
    if x.size <= 0:
        raise DomainError("drop needs a non-empty source histogram")
    for g, m in y.items():
        if m > x.count(g):
            return math.inf
    return float(Fraction(x.size - y.size) / Fraction(x.size))


def move(x: AnyHistogram, y: AnyHistogram) -> float:
    """Worst per-element displacement between equal-size histograms.

    Infinite when sizes differ; zero when both are empty.
    """
    if x.space != y.space:
        raise DomainError("move across different spaces")
    if x.size != y.size:
        return math.inf
    if x.size == 0:
        return 0.0
    return winf(_normalized(x), _normalized(y))


class DrmvResult(NamedTuple):
    value: float
    exact: bool
    witness: Optional[Histogram]  # surviving sub-histogram z realizing the value


def _min_move_flow(x: Histogram, y: Histogram) -> tuple[float, Histogram]:
    """min over z <= x with |z| = |y| of move(z, y), plus an optimal z.

    move(z, y) <= t is equivalent to routing every demand y(g) from supplies
    capped by x over pairs at distance <= t, so the minimum is the smallest
    pairwise distance threshold at which that flow saturates.
    """
    xs = list(x.items())
    ys = list(y.items())
    space = x.space
    d2 = [[space.dist2_exact(a, b) for b, _ in ys] for a, _ in xs]
    candidates = sorted({Fraction(0)} | {v for row in d2 for v in row})
    demand = Fraction(y.size)

    def saturates(t2: Fraction, want_flow: bool = False):
        nx, ny = len(xs), len(ys)
        net = _FlowNet(nx + ny + 2)
        s, t = nx + ny, nx + ny + 1
        for i, (_, c) in enumerate(xs):
            net.add(s, i, Fraction(c))
        for j, (_, c) in enumerate(ys):
            net.add(nx + j, t, Fraction(c))
        for i in range(nx):
            for j in range(ny):
                if d2[i][j] <= t2:
                    net.add(i, nx + j, demand)
        ok = net.max_flow(s, t) == demand
        if not want_flow:
            return ok, None
        marginal = [Fraction(0)] * nx
        for j in range(ny):
            for v, c in net.cap[nx + j].items():
                if 0 <= v < nx and c > 0:  # residual back-edge = shipped amount
                    marginal[v] += c
        return ok, marginal

    lo, hi = 0, len(candidates) - 1
    if not saturates(candidates[0])[0]:
        while lo + 1 < hi:  # complete graph (last candidate) always saturates
            mid = (lo + hi) // 2
            if saturates(candidates[mid])[0]:
                hi = mid
            else:
                lo = mid
    else:
        hi = 0
    _, marginal = saturates(candidates[hi], want_flow=True)
    z = Histogram({xs[i][0]: int(m) for i, m in enumerate(marginal) if m > 0}, space)
    return math.sqrt(float(candidates[hi])), z


def drmv(x: Histogram, y: Histogram, eta: float) -> DrmvResult:
    """Drop down to |y| elements, then move them onto y; eta weights the move.

    Exact at any scale: the drop fraction is pinned at (|x|-|y|)/|x|, and the
    best achievable move term comes out of the threshold-flow search.
    """
    if eta < 0:
        raise ParameterError("eta must be non-negative")
    if x.space != y.space:
        raise DomainError("drmv across different spaces")
    if x.size == 0:
        raise DomainError("drmv needs a non-empty source histogram")
    if y.size > x.size:
        return DrmvResult(math.inf, True, None)
    drop_part = float(Fraction(x.size - y.size, x.size))
    if y.size == 0:
        return DrmvResult(drop_part, True, Histogram({}, x.space))
    move_val, z = _min_move_flow(x, y)
    return DrmvResult(drop_part + eta * move_val, True, z)


def distortion_value(kind: DistortionKind, x: Histogram, y: Histogram) -> float:
    if kind.name == "drop":
        return drop(x, y)
    if kind.name == "move":
        return move(x, y)
    return drmv(x, y, kind.eta).value


def dhat(kind: DistortionKind, x: Histogram, support: Iterable[Histogram]) -> float:
    """Distortion from x to a distribution: the worst case over its support."""
    worst = 0.0
    seen = False
    for x2 in support:
        seen = True
        worst = max(worst, distortion_value(kind, x, x2))
        if worst == math.inf:
            break
    if not seen:
        raise DomainError("dhat needs a non-empty support")
    return worst


def drop_move_switch(x: Histogram, z: Histogram, y: Histogram) -> FractionalHistogram:
    """Reorder a move-then-drop path into drop-then-move through the same ends.

    Given move(x, z) = a1 finite and drop(z, y) = a2 < 1, builds s with
    drop(x, s) = a2 and move(s, y) <= a1: take an optimal coupling of the
    normalized x and z, thin each cell (g_x, g) by the survival ratio
    y(g)/z(g), renormalize by 1/(1-a2), and read off the first marginal
    times |y|.  Bar masses are exact rationals; .round() gives an integer
    histogram when one is required.
    """
    a1 = move(x, z)
    if math.isinf(a1):
        raise DomainError("move(x, z) must be finite")
    if z.size == 0:
        raise DomainError("switch needs a non-empty intermediate")
    d = drop(z, y)
    if math.isinf(d):
        raise DomainError("drop(z, y) must be finite")
    a2 = Fraction(z.size - y.size, z.size)
    if a2 >= 1:
        raise DomainError("drop(z, y) must be < 1")
    _, coupling = winf_lossy_witness(_normalized(x), _normalized(z), 0.0)
    keep = 1 - a2  # = |y| / |z|
    first: dict[Point, Fraction] = {}
    for gx, gz, m in coupling.cells:
        cz = z.count(gz)
        if cz == 0:
            raise DomainError("coupling leaked mass outside the intermediate support")
        ratio = Fraction(y.count(gz), cz)
        if ratio == 0:
            continue
        first[gx] = first.get(gx, Fraction(0)) + m * ratio / keep
    if sum(first.values(), Fraction(0)) != 1:
        raise DomainError("optimal coupling did not transport all mass")
    scaled = [(g, m * y.size) for g, m in first.items()]
    return FractionalHistogram(scaled, x.space)
