"""Benchmark harness: dataset generators, experiment runner, CSV emission.

An experiment is described by a line-oriented ``key = value`` config file
(see ``parse_config`` for the schema).  The runner scores every configured
mechanism on every epsilon of the grid, over ``datasets`` generated inputs
with ``runs`` repetitions each, and reports mean plain error and mean
flexible error as percentages of the range [0, B).

Determinism contract: identical config + master seed give a byte-identical
CSV regardless of the worker-thread count.  Every (dataset, run, mechanism,
epsilon) task derives its own stream seed via split_seed, tasks never share
mutable state, and aggregation always walks results in fixed index order.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .audit import flexible_error
from .baselines import bns_mech, exp_mech, ptr_mech, sanpoints_mech, ss_mech
from .certificates import solve_q
from .hist import (
    DomainError,
    Histogram,
    MetricSpace,
    ParameterError,
    StatisticKind,
    UndefinedStatisticError,
    eval_statistic,
    parse_statistic,
)
from .mechanisms import (
    UNDEFINED,
    BucketSpec,
    MechParams,
    RngStream,
    mech_hbs,
    split_seed,
)

DEFAULT_DELTA = 2.0 ** -20
DEFAULT_DROP_BUDGET = 0.005
DEFAULT_SEED = 20260814
MECHANISMS = ("buckethist", "expmech", "ptr", "smoothsens", "bnshist", "sanpoints")

FLAG_APPROX = "approximate reproduction"
FLAG_NO_CERT = "cert unavailable"

CSV_COLUMNS = ("experiment", "mechanism", "epsilon", "mean_err_pct",
               "mean_flex_err_pct", "stderr_pct", "runs", "flags")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything the runner needs; one instance per experiment."""

    experiment: str
    statistic: StatisticKind
    bound: int
    generator: str
    eps_grid: tuple[float, ...]
    delta: float = DEFAULT_DELTA
    datasets: int = 10
    runs: int = 10
    drop_budget: float = DEFAULT_DROP_BUDGET
    mechanisms: tuple[str, ...] = MECHANISMS
    beta: float | None = None  # None -> bound / 20
    sanpoints_rounds: int = 8
    scale: float = 1.0
    seed: int = DEFAULT_SEED
    # generator parameters (used according to `generator`)
    median: float = 45.0
    cauchy_scale: float = 4.0
    items: int = 10_000
    zero_last: int = 0
    steps: tuple[tuple[int, int], ...] = ()  # (height, width) blocks
    bars: int = 30
    poisson_mean: float = 250.0

    def __post_init__(self) -> None:
        if not self.eps_grid:
            raise ParameterError("eps_grid must not be empty")
        if any(not e > 0 for e in self.eps_grid):
            raise ParameterError("every epsilon must be positive")
        if not 0 < self.delta < 1:
            raise ParameterError("delta must lie in (0,1)")
        if self.datasets < 1 or self.runs < 1:
            raise ParameterError("datasets and runs must be >= 1")
        if not 0 <= self.drop_budget < 1:
            raise ParameterError("drop_budget must lie in [0,1)")
        if not self.bound > 0:
            raise ParameterError("bound must be positive")
        if not self.scale > 0:
            raise ParameterError("scale must be positive")
        if not self.mechanisms:
            raise ParameterError("mechanism list must not be empty")
        unknown = [m for m in self.mechanisms if m not in MECHANISMS]
        if unknown:
            raise ParameterError(f"unknown mechanisms: {', '.join(unknown)}")
        if self.generator not in ("cauchy", "steps", "poisson"):
            raise ParameterError(f"unknown generator {self.generator!r}")
        if self.generator == "steps" and not self.steps:
            raise ParameterError("steps generator needs a steps = h x w, ... line")

    @property
    def beta_value(self) -> float:
        return self.bound / 20 if self.beta is None else self.beta


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    mechanism: str
    epsilon: float
    mean_err_pct: float
    mean_flex_err_pct: float
    stderr_pct: float
    runs: int
    flags: str

    def __post_init__(self) -> None:
        for v in (self.mean_err_pct, self.mean_flex_err_pct, self.stderr_pct):
            if not 0 <= v <= 100:
                raise ParameterError(f"percentage {v} outside [0,100]")


# ---------------------------------------------------------------------------
# config file parsing


_LIST_KEYS = {"eps_grid", "mechanisms", "steps"}
_INT_KEYS = {"bound", "datasets", "runs", "sanpoints_rounds", "seed", "items",
             "zero_last", "bars", "k"}
_FLOAT_KEYS = {"delta", "drop_budget", "beta", "scale", "median",
               "cauchy_scale", "poisson_mean"}


def _parse_number(tok: str) -> float:
    """Plain float, with 2^-20 style powers accepted for delta."""
    tok = tok.strip()
    if "^" in tok:
        base, exp = tok.split("^", 1)
        return float(base) ** float(exp)
    return float(tok)


def parse_config(text: str) -> ExperimentConfig:
    """Parse a line-oriented ``key = value`` experiment description.

    Lists are comma-separated; ``steps`` blocks are HEIGHTxWIDTH pairs;
    ``#`` starts a comment.  Unknown keys are rejected so typos fail loudly.
    """
    raw: dict[str, str] = {}
    for ln, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ParameterError(f"config line {ln}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if key in raw:
            raise ParameterError(f"config line {ln}: duplicate key {key!r}")
        raw[key] = value

    known = (_LIST_KEYS | _INT_KEYS | _FLOAT_KEYS
             | {"experiment", "statistic", "generator"})
    unknown = set(raw) - known
    if unknown:
        raise ParameterError(f"unknown config keys: {', '.join(sorted(unknown))}")
    for required in ("experiment", "statistic", "bound", "generator", "eps_grid"):
        if required not in raw:
            raise ParameterError(f"config is missing the {required!r} key")

    kwargs: dict = {
        "experiment": raw["experiment"],
        "generator": raw["generator"].lower(),
    }
    kind = parse_statistic(raw["statistic"],
                           k=int(raw["k"]) if "k" in raw else None)
    kwargs["statistic"] = kind
    kwargs["eps_grid"] = tuple(_parse_number(t) for t in raw["eps_grid"].split(","))
    if "mechanisms" in raw:
        kwargs["mechanisms"] = tuple(t.strip() for t in raw["mechanisms"].split(","))
    if "steps" in raw:
        blocks = []
        for tok in raw["steps"].split(","):
            try:
                h, w = tok.lower().split("x")
                blocks.append((int(h), int(w)))
            except ValueError:
                raise ParameterError(f"bad steps block {tok!r}, expected HEIGHTxWIDTH")
        kwargs["steps"] = tuple(blocks)
    for key in _INT_KEYS - {"k"}:
        if key in raw:
            kwargs[key] = int(raw[key])
    for key in _FLOAT_KEYS:
        if key in raw:
            kwargs[key] = _parse_number(raw[key])
    return ExperimentConfig(**kwargs)


def read_config(path: str) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


# ---------------------------------------------------------------------------
# dataset generators


def gen_dataset(cfg: ExperimentConfig, rng: RngStream) -> Histogram:
    """One input histogram over [0, bound) according to the generator spec.

    The scale factor multiplies heights (item count for the Cauchy stream),
    preserving the shape of the data.
    """
    space = MetricSpace(1, float(cfg.bound))
    if cfg.generator == "steps":
        counts: dict[tuple, int] = {}
        g = 0
        for height, width in cfg.steps:
            h = round(height * cfg.scale)
            for _ in range(width):
                if g >= cfg.bound:
                    raise ParameterError("steps blocks exceed the bound")
                if h > 0:
                    counts[(g,)] = h
                g += 1
        return Histogram(counts, space)
    if cfg.generator == "poisson":
        if cfg.bars > cfg.bound:
            raise ParameterError("more bars than the bound allows")
        heights = rng.poisson(cfg.poisson_mean * cfg.scale, size=cfg.bars)
        return Histogram({(g,): int(h) for g, h in enumerate(heights) if h > 0},
                         space)
    # cauchy: inverse-CDF draws, rejecting out-of-range values, then the
    # rightmost zero_last bars are emptied (their items are discarded).
    want = round(cfg.items * cfg.scale)
    keep_below = cfg.bound - cfg.zero_last
    bars = np.zeros(cfg.bound, dtype=np.int64)
    kept = 0
    while kept < want:
        u = rng.uniform(size=max(64, want - kept))
        draws = cfg.median + cfg.cauchy_scale * np.tan(np.pi * (u - 0.5))
        draws = draws[(draws >= 0) & (draws < cfg.bound)]
        if draws.size > want - kept:
            draws = draws[: want - kept]
        np.add.at(bars, draws.astype(np.int64), 1)
        kept += draws.size
    bars[keep_below:] = 0
    return Histogram({(g,): int(c) for g, c in enumerate(bars) if c > 0}, space)


# ---------------------------------------------------------------------------
# our mechanism's parameter derivation


def derive_mech_params(bound: float, beta: float, delta: float, eps: float,
                       n: int) -> tuple[MechParams, tuple[str, ...]]:
    """(alpha, beta, eps) for the bucketed noisy-histogram release.

    q comes from the delta solver, tau = q/n and alpha = tau*t.  When the
    derivation leaves the valid range (tau or alpha >= 1, e.g. a tiny input)
    the run still happens with alpha clamped just below 1, but the result is
    flagged: no certificate covers it.
    """
    q = solve_q(eps, delta)
    t = BucketSpec(w=2.0 * beta, B=float(bound)).bucket_count
    alpha = (q / n) * t
    flags: tuple[str, ...] = ()
    if not alpha < 1:
        alpha = math.nextafter(1.0, 0.0)
        flags = (FLAG_NO_CERT,)
    return MechParams(alpha=alpha, beta=beta, eps=eps, B=float(bound)), flags


def derive_params(cfg: ExperimentConfig, eps: float, n: int) -> tuple[MechParams, tuple[str, ...]]:
    return derive_mech_params(cfg.bound, cfg.beta_value, cfg.delta, eps, n)


# ---------------------------------------------------------------------------
# runner


def _release(name: str, cfg: ExperimentConfig, x: Histogram, eps: float,
             rng: RngStream):
    """Run one mechanism once; returns (released value, row flags)."""
    kind = cfg.statistic
    if name == "buckethist":
        params, flags = derive_params(cfg, eps, x.size)
        return mech_hbs(kind, x, params, rng), flags
    if name == "expmech":
        return exp_mech(kind, x, eps, rng), ()
    if name == "ptr":
        return ptr_mech(kind, x, eps, cfg.delta, rng), ()
    if name == "smoothsens":
        return ss_mech(kind, x, eps, cfg.delta, rng), ()
    if name == "bnshist":
        return bns_mech(kind, x, eps, cfg.delta, rng), ()
    if name == "sanpoints":
        return (sanpoints_mech(kind, x, eps, cfg.delta, rng,
                               k_rounds=cfg.sanpoints_rounds), (FLAG_APPROX,))
    raise ParameterError(f"unknown mechanism {name!r}")  # pragma: no cover


def _score(cfg: ExperimentConfig, x: Histogram, truth: int, released):
    """(plain, flexible) error of one release, both capped at the range."""
    bound = float(cfg.bound)
    if released is UNDEFINED:
        plain = bound
    else:
        plain = min(abs(float(released) - truth), bound)
    flex = min(flexible_error(cfg.statistic, x, released, cfg.drop_budget), bound)
    return plain, flex


def _run_cell(cfg: ExperimentConfig, x: Histogram, truth: int,
              d: int, r: int) -> list[tuple[float, float, tuple[str, ...]]]:
    """All (mechanism, eps) scores of one (dataset, run) task, in grid order."""
    out = []
    for m, name in enumerate(cfg.mechanisms):
        for e, eps in enumerate(cfg.eps_grid):
            rng = RngStream(split_seed(cfg.seed, d, r, m, e))
            released, flags = _release(name, cfg, x, eps, rng)
            plain, flex = _score(cfg, x, truth, released)
            out.append((plain, flex, flags))
    return out


def run_experiment(cfg: ExperimentConfig, threads: int = 1
                   ) -> tuple[list[ResultRow], list[str]]:
    """Score every configured mechanism; returns (rows, metadata lines).

    Rows come out in (mechanism, epsilon) grid order.  Thread count affects
    wall time only: tasks are independent and the aggregation below reads
    the result grid in fixed index order.
    """
    if threads < 1:
        raise ParameterError("threads must be >= 1")
    datasets = [gen_dataset(cfg, RngStream(split_seed(cfg.seed, d)))
                for d in range(cfg.datasets)]
    truths = []
    for d, x in enumerate(datasets):
        if x.size == 0:
            raise DomainError(f"dataset {d} came out empty")
        try:
            truths.append(int(eval_statistic(cfg.statistic, x)))
        except UndefinedStatisticError as exc:
            raise DomainError(f"dataset {d}: statistic undefined on the raw "
                              f"input, nothing to score against") from exc

    tasks = [(d, r) for d in range(cfg.datasets) for r in range(cfg.runs)]
    cells: dict[tuple[int, int], list] = {}
    if threads == 1:
        for d, r in tasks:
            cells[(d, r)] = _run_cell(cfg, datasets[d], truths[d], d, r)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {(d, r): pool.submit(_run_cell, cfg, datasets[d],
                                           truths[d], d, r)
                       for d, r in tasks}
        for key, fut in futures.items():
            cells[key] = fut.result()

    pct = 100.0 / cfg.bound
    total = cfg.datasets * cfg.runs
    rows: list[ResultRow] = []
    for m, name in enumerate(cfg.mechanisms):
        for e, eps in enumerate(cfg.eps_grid):
            idx = m * len(cfg.eps_grid) + e
            plains = np.empty(total)
            flexes = np.empty(total)
            flags: set[str] = set()
            for i, (d, r) in enumerate(tasks):  # fixed order: determinism
                plain, flex, cell_flags = cells[(d, r)][idx]
                plains[i] = plain
                flexes[i] = flex
                flags.update(cell_flags)
            stderr = 0.0 if total < 2 else float(plains.std(ddof=1) / math.sqrt(total))
            rows.append(ResultRow(
                experiment=cfg.experiment,
                mechanism=name,
                epsilon=eps,
                mean_err_pct=float(plains.mean()) * pct,
                mean_flex_err_pct=float(flexes.mean()) * pct,
                stderr_pct=stderr * pct,
                runs=total,
                flags="; ".join(sorted(flags)),
            ))
    return rows, _metadata(cfg, datasets)


def _metadata(cfg: ExperimentConfig, datasets: Sequence[Histogram]) -> list[str]:
    """Comment lines echoing the parameter derivation for transparency."""
    lines = [
        f"experiment = {cfg.experiment}",
        f"statistic = {cfg.statistic}",
        f"generator = {cfg.generator}"
        + (" (out-of-range draws rejected and redrawn)" if cfg.generator == "cauchy" else ""),
        f"bound = {cfg.bound}  delta = {cfg.delta!r}  drop_budget = {cfg.drop_budget!r}",
        f"datasets = {cfg.datasets}  runs = {cfg.runs}  scale = {cfg.scale!r}  "
        f"master_seed = {cfg.seed}",
        f"mechanisms = {', '.join(cfg.mechanisms)}",
    ]
    beta = cfg.beta_value
    t = BucketSpec(w=2.0 * beta, B=float(cfg.bound)).bucket_count
    lines.append(f"ours: beta = {beta!r}  w = {2.0 * beta!r}  t = {t}")
    n0 = datasets[0].size
    for eps in cfg.eps_grid:
        q = solve_q(eps, cfg.delta)
        tau = q / n0
        lines.append(f"ours at eps = {eps!r}: q = {q!r}  tau = {tau!r}  "
                     f"alpha = {tau * t!r}  (dataset 0, n = {n0})")
    return lines


# ---------------------------------------------------------------------------
# CSV


def _fmt_eps(eps: float) -> str:
    return repr(float(eps))


def write_csv(rows: Sequence[ResultRow], meta: Sequence[str], out: IO[str]) -> None:
    for line in meta:
        out.write(f"# {line}\n")
    out.write(",".join(CSV_COLUMNS) + "\n")
    for row in rows:
        flags = f'"{row.flags}"' if "," in row.flags else row.flags
        out.write(",".join((
            row.experiment,
            row.mechanism,
            _fmt_eps(row.epsilon),
            f"{row.mean_err_pct:.6f}",
            f"{row.mean_flex_err_pct:.6f}",
            f"{row.stderr_pct:.6f}",
            str(row.runs),
            flags,
        )) + "\n")


def run_to_csv(cfg: ExperimentConfig, out: IO[str], threads: int = 1) -> list[ResultRow]:
    rows, meta = run_experiment(cfg, threads=threads)
    write_csv(rows, meta, out)
    return rows
