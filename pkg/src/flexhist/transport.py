"""Finite-support lossy Wasserstein engine.

The worst-case transport distance with loss budget ``gamma`` is computed by
a reduction: a transport radius ``beta`` is achievable iff the maximum mass
routable through atom pairs at distance <= beta (source capacities P, sink
capacities Q) reaches ``1 - gamma``; the remaining mass is parked on
zero-distance diagonal cells, charging the marginal-deviation budget only.
The infimum over beta is attained on the set of pairwise distances (plus 0),
so a binary search over that candidate set with an exact max-flow
feasibility test gives the exact value.

All flow arithmetic is exact ``Fraction`` arithmetic: masses coming from
histograms are exact rationals, and float masses convert to Fractions
exactly, so the feasibility predicate never suffers roundoff.  Distances are
compared through exact squared distances; only the final square root is a
float.  The average-case variant ships mass ``1 - theta`` by successive
shortest augmenting paths (optimal at every intermediate shipped mass).
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .hist import (
    DomainError,
    Histogram,
    MetricSpace,
    Point,
    PointLike,
    as_point,
)

MassLike = Union[int, float, Fraction]

#: feasibility slack absorbing float->Fraction conversion of input masses
_FUZZ = Fraction(1, 10**12)


class DiscreteDistribution:
    """Finitely supported distribution over a metric space, exact masses."""

    __slots__ = ("atoms", "space")

    def __init__(self, atoms: Iterable[tuple[PointLike, MassLike]], space: MetricSpace):
        merged: dict[Point, Fraction] = {}
        for g, m in atoms:
            mass = Fraction(m)
            if mass <= 0:
                raise DomainError(f"atom mass {m!r} must be positive")
            pt = as_point(g, space.dimension)
            merged[pt] = merged.get(pt, Fraction(0)) + mass
        if not merged:
            raise DomainError("distribution needs at least one atom")
        total = sum(merged.values())
        if abs(total - 1) > _FUZZ:
            raise DomainError(f"masses sum to {float(total)}, expected 1")
        object.__setattr__(self, "atoms", tuple(sorted(merged.items())))
        object.__setattr__(self, "space", space)

    def __setattr__(self, name, value):  # pragma: no cover - guard
        raise AttributeError("DiscreteDistribution is immutable")

    @classmethod
    def from_histogram(cls, x: Histogram) -> "DiscreteDistribution":
        if x.size == 0:
            raise DomainError("cannot normalise an empty histogram")
        n = x.size
        return cls([(g, Fraction(c, n)) for g, c in x.items()], x.space)

    def mass(self, g: PointLike) -> Fraction:
        pt = as_point(g, self.space.dimension)
        for p, m in self.atoms:
            if p == pt:
                return m
        return Fraction(0)

    def points(self) -> tuple[Point, ...]:
        return tuple(p for p, _ in self.atoms)

    def __len__(self) -> int:
        return len(self.atoms)

    def __repr__(self) -> str:
        inner = ", ".join(f"{p}: {float(m):.4g}" for p, m in self.atoms)
        return f"DiscreteDistribution({{{inner}}})"


@dataclass(frozen=True)
class Coupling:
    """Joint mass assignment; cells are (source point, target point, mass).

    Target points are allowed outside Q's support: slack mass parks on
    diagonal cells and is paid for by the marginal-deviation budget instead
    of the transport radius.
    """

    cells: tuple[tuple[Point, Point, Fraction], ...]

    def total_mass(self) -> Fraction:
        return sum((m for *_xy, m in self.cells), Fraction(0))

    def first_marginal(self) -> dict[Point, Fraction]:
        out: dict[Point, Fraction] = {}
        for src, _dst, m in self.cells:
            out[src] = out.get(src, Fraction(0)) + m
        return out

    def second_marginal(self) -> dict[Point, Fraction]:
        out: dict[Point, Fraction] = {}
        for _src, dst, m in self.cells:
            out[dst] = out.get(dst, Fraction(0)) + m
        return out

    def deviation_sum(self, p: DiscreteDistribution, q: DiscreteDistribution) -> Fraction:
        return _tv_of(self.first_marginal(), dict(p.atoms)) + _tv_of(
            self.second_marginal(), dict(q.atoms)
        )

    def max_distance(self, space: MetricSpace) -> float:
        return max((space.distance(a, b) for a, b, m in self.cells if m > 0), default=0.0)


def _tv_of(a: dict[Point, Fraction], b: dict[Point, Fraction]) -> Fraction:
    keys = set(a) | set(b)
    return sum((abs(a.get(k, Fraction(0)) - b.get(k, Fraction(0))) for k in keys), Fraction(0)) / 2


def tv_distance(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Total variation distance: half the L1 gap over the union support."""
    if p.space != q.space:
        raise DomainError("tv_distance across different spaces")
    return float(_tv_of(dict(p.atoms), dict(q.atoms)))


# ---------------------------------------------------------------------------
# exact max-flow (Edmonds-Karp on Fraction capacities)


class _FlowNet:
    def __init__(self, n: int):
        self.n = n
        self.cap: list[dict[int, Fraction]] = [dict() for _ in range(n)]

    def add(self, u: int, v: int, c: Fraction) -> None:
        self.cap[u][v] = self.cap[u].get(v, Fraction(0)) + c
        self.cap[v].setdefault(u, Fraction(0))

    def max_flow(self, s: int, t: int) -> Fraction:
        total = Fraction(0)
        while True:
            parent = [-1] * self.n
            parent[s] = s
            queue = deque([s])
            while queue and parent[t] == -1:
                u = queue.popleft()
                for v, c in self.cap[u].items():
                    if c > 0 and parent[v] == -1:
                        parent[v] = u
                        queue.append(v)
            if parent[t] == -1:
                return total
            bottleneck = None
            v = t
            while v != s:
                u = parent[v]
                c = self.cap[u][v]
                bottleneck = c if bottleneck is None else min(bottleneck, c)
                v = u
            v = t
            while v != s:
                u = parent[v]
                self.cap[u][v] -= bottleneck
                self.cap[v][u] += bottleneck
                v = u
            total += bottleneck


def _pair_dist2(p: DiscreteDistribution, q: DiscreteDistribution) -> list[list[Fraction]]:
    space = p.space
    return [[space.dist2_exact(a, b) for b, _ in q.atoms] for a, _ in p.atoms]


def _transportable(p: DiscreteDistribution, q: DiscreteDistribution,
                   d2: list[list[Fraction]], beta2: Fraction,
                   want_flow: bool = False):
    """Max mass routable using only pairs with squared distance <= beta2."""
    np_, nq = len(p.atoms), len(q.atoms)
    net = _FlowNet(np_ + nq + 2)
    s, t = np_ + nq, np_ + nq + 1
    for i, (_, m) in enumerate(p.atoms):
        net.add(s, i, m)
    for j, (_, m) in enumerate(q.atoms):
        net.add(np_ + j, t, m)
    for i in range(np_):
        for j in range(nq):
            if d2[i][j] <= beta2:
                net.add(i, np_ + j, Fraction(2))  # any cap >= 1 is unbounded here
    value = net.max_flow(s, t)
    if not want_flow:
        return value, None
    flow: dict[tuple[int, int], Fraction] = {}
    for j in range(nq):
        for v, c in net.cap[np_ + j].items():
            if 0 <= v < np_ and c > 0:  # residual back-edge = shipped amount
                flow[(v, j)] = c
    return value, flow


def _check_gamma(gamma: float) -> Fraction:
    if not 0 <= gamma <= 1:
        raise DomainError(f"gamma must be in [0,1], got {gamma}")
    return Fraction(gamma)


def _lossy_search(p: DiscreteDistribution, q: DiscreteDistribution, gamma: float):
    """Smallest candidate beta (as squared Fraction) admitting mass 1 - gamma."""
    if p.space != q.space:
        raise DomainError("transport across different spaces")
    g = _check_gamma(gamma)
    need = 1 - g - _FUZZ
    d2 = _pair_dist2(p, q)
    candidates = sorted({Fraction(0)} | {v for row in d2 for v in row})
    lo, hi = 0, len(candidates) - 1
    # largest candidate always routes everything through the complete graph
    if _transportable(p, q, d2, candidates[0])[0] >= need:
        return candidates[0], d2
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if _transportable(p, q, d2, candidates[mid])[0] >= need:
            hi = mid
        else:
            lo = mid
    return candidates[hi], d2


def winf_lossy(p: DiscreteDistribution, q: DiscreteDistribution, gamma: float) -> float:
    """gamma-lossy worst-case transport distance between p and q."""
    beta2, _ = _lossy_search(p, q, gamma)
    return math.sqrt(float(beta2))


def winf(p: DiscreteDistribution, q: DiscreteDistribution) -> float:
    """Worst-case (infinity-order) transport distance, no loss allowed."""
    return winf_lossy(p, q, 0.0)


def winf_lossy_witness(p: DiscreteDistribution, q: DiscreteDistribution,
                       gamma: float) -> tuple[float, Coupling]:
    """The lossy distance together with an optimal coupling achieving it."""
    beta2, d2 = _lossy_search(p, q, gamma)
    _, flow = _transportable(p, q, d2, beta2, want_flow=True)
    cells: list[tuple[Point, Point, Fraction]] = []
    shipped = [Fraction(0)] * len(p.atoms)
    for (i, j), m in sorted(flow.items()):
        cells.append((p.atoms[i][0], q.atoms[j][0], m))
        shipped[i] += m
    for i, (pt, mass) in enumerate(p.atoms):
        leftover = mass - shipped[i]
        if leftover > 0:
            cells.append((pt, pt, leftover))  # zero-distance slack cell
    return math.sqrt(float(beta2)), Coupling(tuple(cells))


# ---------------------------------------------------------------------------
# theta-lossy average distance: min-cost partial transport of mass 1 - theta


def w_avg_lossy(p: DiscreteDistribution, q: DiscreteDistribution, theta: float) -> float:
    """Average-case transport distance allowed to ignore a theta mass slice.

    Equivalent to shipping exactly ``1 - theta`` mass at minimum cost: the
    untransported slice pads both marginals at zero cost, consuming the
    deviation budget.  Successive shortest paths keep every intermediate
    shipped amount optimal, so the loop stops exactly at the target mass.
    """
    if p.space != q.space:
        raise DomainError("transport across different spaces")
    t = _check_gamma(theta)
    supply = sum(m for _, m in p.atoms)
    demand = sum(m for _, m in q.atoms)
    target = min(1 - t, supply, demand)
    if target <= 0:
        return 0.0
    return _min_cost_partial(p, q, target)


def _min_cost_partial(p: DiscreteDistribution, q: DiscreteDistribution,
                      target: Fraction) -> float:
    space = p.space
    np_, nq = len(p.atoms), len(q.atoms)
    n = np_ + nq + 2
    s, t = np_ + nq, np_ + nq + 1

    cap: list[dict[int, Fraction]] = [dict() for _ in range(n)]
    cost: list[dict[int, float]] = [dict() for _ in range(n)]

    def add(u: int, v: int, c: Fraction, w: float) -> None:
        cap[u][v] = c
        cap[v][u] = Fraction(0)
        cost[u][v] = w
        cost[v][u] = -w

    for i, (_, m) in enumerate(p.atoms):
        add(s, i, m, 0.0)
    for j, (_, m) in enumerate(q.atoms):
        add(np_ + j, t, m, 0.0)
    for i, (a, _) in enumerate(p.atoms):
        for j, (b, _) in enumerate(q.atoms):
            add(i, np_ + j, Fraction(2), space.distance(a, b))

    potential = [0.0] * n  # all raw costs >= 0, so Dijkstra works from the start
    shipped = Fraction(0)
    total_cost = 0.0
    while shipped < target:
        dist = [math.inf] * n
        prev = [-1] * n
        dist[s] = 0.0
        pq = [(0.0, s)]
        while pq:
            d, u = heapq.heappop(pq)
            if d > dist[u] + 1e-15:
                continue
            for v, c in cap[u].items():
                if c <= 0:
                    continue
                nd = d + cost[u][v] + potential[u] - potential[v]
                if nd < dist[v] - 1e-15:
                    dist[v] = nd
                    prev[v] = u
                    heapq.heappush(pq, (nd, v))
        if prev[t] == -1:
            break  # cannot ship more (supplies exhausted)
        for u in range(n):
            if dist[u] < math.inf:
                potential[u] += dist[u]
        bottleneck = target - shipped
        v = t
        while v != s:
            u = prev[v]
            bottleneck = min(bottleneck, cap[u][v])
            v = u
        v = t
        path_cost = 0.0
        while v != s:
            u = prev[v]
            cap[u][v] -= bottleneck
            cap[v][u] += bottleneck
            path_cost += cost[u][v]
            v = u
        total_cost += path_cost * float(bottleneck)
        shipped += bottleneck
    return total_cost
