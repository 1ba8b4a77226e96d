"""Histogram data model, ground-set metrics and histogram statistics.

Histograms are finite multisets over a bounded Euclidean box [0, B)^d,
stored sparsely as ``point -> count``.  Ground points are tuples of
coordinates; 1-D points may be passed as bare scalars anywhere and are
normalised internally.  All objects are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping, Union

Scalar = Union[int, float]
Point = tuple[Scalar, ...]
PointLike = Union[Scalar, Point]


class DomainError(ValueError):
    """Input outside an operation's domain (empty histogram, space mismatch, ...)."""


class ParameterError(ValueError):
    """Structurally valid input with out-of-range parameters."""


class UndefinedStatisticError(DomainError):
    """The requested statistic does not exist on this histogram."""


def as_point(g: PointLike, dimension: int) -> Point:
    if isinstance(g, tuple):
        pt = g
    else:
        pt = (g,)
    if len(pt) != dimension:
        raise DomainError(f"point {g!r} has dimension {len(pt)}, space expects {dimension}")
    for v in pt:
        if not math.isfinite(v):
            raise DomainError(f"non-finite coordinate in point {g!r}")
    # ints where integral, so text round-trips and dict keys stay canonical
    return tuple(int(v) if isinstance(v, float) and v.is_integer() else v for v in pt)


@dataclass(frozen=True)
class MetricSpace:
    """Euclidean box [0, B)^d with the usual L2 distance."""

    dimension: int = 1
    bound: float = math.inf

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ParameterError("dimension must be >= 1")
        if not self.bound > 0:
            raise ParameterError("bound must be positive")

    def contains(self, g: PointLike) -> bool:
        pt = as_point(g, self.dimension)
        return all(0 <= v < self.bound for v in pt)

    def distance(self, a: PointLike, b: PointLike) -> float:
        pa = as_point(a, self.dimension)
        pb = as_point(b, self.dimension)
        if self.dimension == 1:
            return abs(pa[0] - pb[0])
        return math.sqrt(sum((u - v) ** 2 for u, v in zip(pa, pb)))

    def dist2_exact(self, a: PointLike, b: PointLike) -> Fraction:
        """Squared distance as an exact rational (floats convert exactly)."""
        pa = as_point(a, self.dimension)
        pb = as_point(b, self.dimension)
        return sum((Fraction(u) - Fraction(v)) ** 2 for u, v in zip(pa, pb))


class Histogram:
    """Immutable sparse histogram: non-negative integer count per ground point."""

    __slots__ = ("_entries", "_size", "space")

    def __init__(self, entries: Mapping[PointLike, int], space: MetricSpace):
        canonical: dict[Point, int] = {}
        for g, c in entries.items():
            if c < 0 or c != int(c):
                raise DomainError(f"count {c!r} at {g!r} must be a non-negative integer")
            if c == 0:
                continue
            pt = as_point(g, space.dimension)
            canonical[pt] = canonical.get(pt, 0) + int(c)
        object.__setattr__(self, "_entries", MappingProxyType(canonical))
        object.__setattr__(self, "_size", sum(canonical.values()))
        object.__setattr__(self, "space", space)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("Histogram is immutable")

    @property
    def size(self) -> int:
        return self._size

    def count(self, g: PointLike) -> int:
        return self._entries.get(as_point(g, self.space.dimension), 0)

    def support(self) -> frozenset[Point]:
        return frozenset(self._entries)

    def items(self) -> Iterator[tuple[Point, int]]:
        return iter(sorted(self._entries.items()))

    def entries(self) -> Mapping[Point, int]:
        return self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Histogram):
            return NotImplemented
        return self.space == other.space and dict(self._entries) == dict(other._entries)

    def __hash__(self) -> int:
        return hash((self.space, frozenset(self._entries.items())))

    def __repr__(self) -> str:
        inner = ", ".join(f"{_fmt_point(g)}: {c}" for g, c in self.items())
        return f"Histogram({{{inner}}}, size={self.size})"


def require_same_space(x: Histogram, y: Histogram) -> None:
    if x.space != y.space:
        raise DomainError(f"mismatched spaces: {x.space} vs {y.space}")


def neighbors(x: Histogram, y: Histogram) -> bool:
    """True iff the histograms differ by at most one element (L1 of counts <= 1)."""
    require_same_space(x, y)
    diff = 0
    for g in x.support() | y.support():
        diff += abs(x.count(g) - y.count(g))
        if diff > 1:
            return False
    return True


def dhist(x: Histogram, y: Histogram) -> float:
    """Worst-case transport distance between the two normalised histograms."""
    require_same_space(x, y)
    if x.size == 0 or y.size == 0:
        raise DomainError("dhist needs non-empty histograms")
    from .transport import DiscreteDistribution, winf

    return winf(DiscreteDistribution.from_histogram(x), DiscreteDistribution.from_histogram(y))


def dsupp(s1: Iterable[PointLike], s2: Iterable[PointLike],
          space: MetricSpace | None = None) -> float:
    """Two-sided farthest-point distance between finite point sets.

    max over each set of the distance from its farthest point to the other
    set.  The 1-D endpoint formula max(|min diff|, |max diff|) is a lower
    bound of this, not an equivalent (interior points can stick out).
    """
    if space is None:
        space = MetricSpace(dimension=1)
    a = [as_point(g, space.dimension) for g in s1]
    b = [as_point(g, space.dimension) for g in s2]
    if not a or not b:
        raise DomainError("dsupp needs non-empty sets")
    d_ab = max(min(space.distance(p, q) for q in b) for p in a)
    d_ba = max(min(space.distance(q, p) for p in a) for q in b)
    return max(d_ab, d_ba)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class StatisticKind:
    """One of max / min / maxk / mode / support; maxk carries its threshold k."""

    name: str
    k: int | None = None

    _VALID = ("max", "min", "maxk", "mode", "support")

    def __post_init__(self) -> None:
        if self.name not in self._VALID:
            raise ParameterError(f"unknown statistic {self.name!r}")
        if self.name == "maxk":
            if self.k is None or self.k < 1:
                raise ParameterError("maxk requires k >= 1")
        elif self.k is not None:
            raise ParameterError(f"{self.name} takes no k")

    def __str__(self) -> str:
        return f"maxk({self.k})" if self.name == "maxk" else self.name


MAX = StatisticKind("max")
MIN = StatisticKind("min")
MODE = StatisticKind("mode")
SUPPORT = StatisticKind("support")


def maxk(k: int) -> StatisticKind:
    return StatisticKind("maxk", k)


def parse_statistic(text: str, k: int | None = None) -> StatisticKind:
    name = text.strip().lower()
    if name == "maxk":
        if k is None:
            raise ParameterError("maxk needs --k")
        return maxk(k)
    return StatisticKind(name)


def eval_statistic(kind: StatisticKind, x: Histogram):
    """Evaluate a histogram statistic.

    Max/Min/MaxK/Mode are 1-D only and return the bar coordinate; Support
    returns the support as a frozenset of points.  Mode ties resolve to the
    smallest bar.  Raises UndefinedStatisticError when x is empty or no bar
    reaches the MaxK threshold.
    """
    if x.size == 0:
        raise UndefinedStatisticError("statistic of an empty histogram")
    if kind.name == "support":
        return x.support()
    if x.space.dimension != 1:
        raise DomainError(f"{kind} is defined on 1-D histograms only")
    bars = sorted((g[0], c) for g, c in x.entries().items())
    if kind.name == "max":
        return bars[-1][0]
    if kind.name == "min":
        return bars[0][0]
    if kind.name == "maxk":
        for g, c in reversed(bars):
            if c >= kind.k:
                return g
        raise UndefinedStatisticError(f"no bar reaches count {kind.k}")
    if kind.name == "mode":
        best_g, best_c = bars[0]
        for g, c in bars[1:]:
            if c > best_c:
                best_g, best_c = g, c
        return best_g
    raise ParameterError(f"unknown statistic {kind!r}")  # pragma: no cover


# ---------------------------------------------------------------------------
# text format: one "<ground-point> <count>" line per bar, '#' comments,
# sorted by ground point; d-dim coordinates comma-separated.


def _fmt_point(g: Point) -> str:
    return ",".join(repr(v) for v in g) if len(g) > 1 else repr(g[0])


def _parse_coord(tok: str) -> Scalar:
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def parse_histogram_text(text: str, space: MetricSpace | None = None) -> Histogram:
    entries: dict[Point, int] = {}
    dim = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            point_tok, count_tok = line.split()
            pt = tuple(_parse_coord(t) for t in point_tok.split(","))
            count = int(count_tok)
        except ValueError as exc:
            raise DomainError(f"line {ln}: expected '<ground-point> <count>', got {raw!r}") from exc
        if dim is None:
            dim = len(pt)
        elif len(pt) != dim:
            raise DomainError(f"line {ln}: mixed point dimensions")
        entries[pt] = entries.get(pt, 0) + count
    if space is None:
        if dim is None:
            raise DomainError("empty histogram file and no space given")
        top = max(max(pt) for pt in entries)
        space = MetricSpace(dimension=dim, bound=float(top) + 1)
    return Histogram(entries, space)


def read_histogram(path: str, space: MetricSpace | None = None) -> Histogram:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_histogram_text(fh.read(), space)


def format_histogram(x: Histogram) -> str:
    return "".join(f"{_fmt_point(g)} {c}\n" for g, c in x.items())


def write_histogram(x: Histogram, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_histogram(x))
