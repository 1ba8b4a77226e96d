"""Config parsing, dataset generators, and the deterministic experiment runner."""

import io
import math

import pytest

from flexhist.bench import (
    CSV_COLUMNS,
    DEFAULT_DELTA,
    DEFAULT_DROP_BUDGET,
    DEFAULT_SEED,
    FLAG_NO_CERT,
    MECHANISMS,
    ExperimentConfig,
    ResultRow,
    derive_mech_params,
    gen_dataset,
    parse_config,
    run_experiment,
    run_to_csv,
    write_csv,
)
from flexhist.hist import DomainError, ParameterError, maxk
from flexhist.mechanisms import RngStream, split_seed

BASE_CFG = """
# demo experiment
experiment = demo
statistic = max
bound = 20
generator = steps
steps = 150x2, 1x3
eps_grid = 1.0, 2.0
mechanisms = buckethist, expmech
datasets = 2
runs = 3
delta = 2^-20
"""


# ---------------------------------------------------------------------------
# config parsing


def test_parse_config_full():
    cfg = parse_config(BASE_CFG)
    assert cfg.experiment == "demo"
    assert cfg.statistic.name == "max"
    assert cfg.bound == 20
    assert cfg.steps == ((150, 2), (1, 3))
    assert cfg.eps_grid == (1.0, 2.0)
    assert cfg.mechanisms == ("buckethist", "expmech")
    assert cfg.delta == 2.0**-20
    assert cfg.datasets == 2 and cfg.runs == 3
    # untouched defaults
    assert cfg.drop_budget == DEFAULT_DROP_BUDGET
    assert cfg.seed == DEFAULT_SEED
    assert cfg.beta is None and cfg.beta_value == 1.0  # bound / 20


def test_parse_config_maxk_threshold():
    cfg = parse_config(
        "experiment = t\nstatistic = maxk\nk = 3\nbound = 10\n"
        "generator = poisson\nbars = 5\neps_grid = 0.5\n")
    assert cfg.statistic == maxk(3)


def test_parse_config_rejects_malformed_input():
    with pytest.raises(ParameterError, match="missing"):
        parse_config("experiment = t\nstatistic = max\nbound = 10\ngenerator = poisson\n")
    with pytest.raises(ParameterError, match="unknown config keys"):
        parse_config(BASE_CFG + "wat = 1\n")
    with pytest.raises(ParameterError, match="duplicate"):
        parse_config(BASE_CFG + "bound = 20\n")
    with pytest.raises(ParameterError, match="key = value"):
        parse_config("experiment\n")
    with pytest.raises(ParameterError, match="steps block"):
        parse_config(BASE_CFG.replace("150x2, 1x3", "150by2"))
    with pytest.raises(ParameterError, match="unknown mechanisms"):
        parse_config(BASE_CFG.replace("expmech", "magic"))
    with pytest.raises(ParameterError, match="unknown generator"):
        parse_config(BASE_CFG.replace("generator = steps", "generator = zipf"))
    with pytest.raises(ParameterError, match="needs a steps"):
        parse_config("\n".join(l for l in BASE_CFG.splitlines()
                               if not l.startswith("steps")))


def test_config_validation_direct():
    ok = dict(experiment="t", statistic=maxk(2), bound=10, generator="poisson",
              eps_grid=(1.0,))
    ExperimentConfig(**ok)
    with pytest.raises(ParameterError):
        ExperimentConfig(**{**ok, "eps_grid": ()})
    with pytest.raises(ParameterError):
        ExperimentConfig(**{**ok, "eps_grid": (0.0,)})
    with pytest.raises(ParameterError):
        ExperimentConfig(**{**ok, "delta": 1.0})
    with pytest.raises(ParameterError):
        ExperimentConfig(**{**ok, "drop_budget": 1.0})
    with pytest.raises(ParameterError):
        ExperimentConfig(**{**ok, "datasets": 0})
    with pytest.raises(ParameterError):
        ExperimentConfig(**{**ok, "bound": 0})
    with pytest.raises(ParameterError):
        ExperimentConfig(**{**ok, "mechanisms": ()})


def test_result_row_validation():
    with pytest.raises(ParameterError):
        ResultRow("e", "m", 1.0, -0.1, 0.0, 0.0, 10, "")
    with pytest.raises(ParameterError):
        ResultRow("e", "m", 1.0, 0.0, 101.0, 0.0, 10, "")


# ---------------------------------------------------------------------------
# dataset generators


def _steps_cfg(**over):
    base = dict(experiment="t", statistic=parse_config(BASE_CFG).statistic,
                bound=20, generator="steps", eps_grid=(1.0,),
                steps=((1000, 2), (1, 3)))
    base.update(over)
    return ExperimentConfig(**base)


def test_gen_steps_exact():
    x = gen_dataset(_steps_cfg(), RngStream(0))
    assert dict(x.items()) == {(0,): 1000, (1,): 1000, (2,): 1, (3,): 1, (4,): 1}
    assert x.size == 2003


def test_gen_steps_scale_drops_rounded_out_bars():
    x = gen_dataset(_steps_cfg(scale=0.5), RngStream(0))
    assert dict(x.items()) == {(0,): 500, (1,): 500}


def test_gen_steps_must_fit_the_bound():
    with pytest.raises(ParameterError):
        gen_dataset(_steps_cfg(steps=((5, 21),)), RngStream(0))


def test_gen_poisson():
    cfg = ExperimentConfig(experiment="t", statistic=parse_config(BASE_CFG).statistic,
                           bound=100, generator="poisson", eps_grid=(1.0,),
                           bars=50, poisson_mean=100.0)
    x = gen_dataset(cfg, RngStream(split_seed(cfg.seed, 0)))
    assert all(0 <= g[0] < 50 for g in x.support())
    assert abs(x.size - 5000) < 400  # total ~ Poisson(5000)
    again = gen_dataset(cfg, RngStream(split_seed(cfg.seed, 0)))
    assert x == again
    with pytest.raises(ParameterError):
        gen_dataset(ExperimentConfig(experiment="t", statistic=cfg.statistic,
                                     bound=10, generator="poisson",
                                     eps_grid=(1.0,), bars=11), RngStream(0))


def test_gen_cauchy():
    cfg = ExperimentConfig(experiment="t", statistic=parse_config(BASE_CFG).statistic,
                           bound=100, generator="cauchy", eps_grid=(1.0,),
                           items=500)
    x = gen_dataset(cfg, RngStream(77))
    assert x.size == 500  # rejection sampling keeps exactly `items`
    assert all(0 <= g[0] < 100 for g in x.support())
    assert x == gen_dataset(cfg, RngStream(77))


def test_gen_cauchy_zero_last():
    cfg = ExperimentConfig(experiment="t", statistic=parse_config(BASE_CFG).statistic,
                           bound=100, generator="cauchy", eps_grid=(1.0,),
                           items=500, zero_last=30)
    x = gen_dataset(cfg, RngStream(77))
    assert all(g[0] < 70 for g in x.support())
    assert 0 < x.size <= 500  # items on the emptied bars are discarded


# ---------------------------------------------------------------------------
# parameter derivation


def test_derive_mech_params_from_delta():
    params, flags = derive_mech_params(bound=100, beta=5.0, delta=2.0**-20,
                                       eps=1.0, n=10_000)
    assert flags == ()
    q = 27.42224479056748  # solve_q(1, 2^-20)
    assert params.tau * 10_000 == pytest.approx(q, rel=1e-12)
    assert params.alpha == pytest.approx(q / 1000, rel=1e-12)  # tau * t, t = 10
    assert params.beta == 5.0 and params.t == 10


def test_derive_mech_params_clamps_and_flags_tiny_inputs():
    params, flags = derive_mech_params(bound=100, beta=5.0, delta=2.0**-20,
                                       eps=1.0, n=100)
    assert flags == (FLAG_NO_CERT,)
    assert params.alpha == math.nextafter(1.0, 0.0)


# ---------------------------------------------------------------------------
# runner


def test_run_experiment_grid_order_and_scores():
    cfg = parse_config(BASE_CFG)
    rows, meta = run_experiment(cfg)
    assert [(r.mechanism, r.epsilon) for r in rows] == [
        ("buckethist", 1.0), ("buckethist", 2.0),
        ("expmech", 1.0), ("expmech", 2.0)]
    for r in rows:
        assert r.experiment == "demo"
        assert r.runs == 6  # datasets * runs
        assert 0.0 <= r.mean_flex_err_pct <= r.mean_err_pct <= 100.0
        assert r.stderr_pct >= 0.0
    assert meta[0] == "experiment = demo"
    assert any(line.startswith("ours: beta = 1.0") for line in meta)
    assert sum(1 for line in meta if line.startswith("ours at eps")) == 2


def test_run_experiment_thread_count_does_not_change_the_csv():
    cfg = parse_config(BASE_CFG)
    outs = []
    for threads in (1, 4):
        buf = io.StringIO()
        run_to_csv(cfg, buf, threads=threads)
        outs.append(buf.getvalue())
    assert outs[0] == outs[1]
    assert CSV_COLUMNS == tuple(
        next(l for l in outs[0].splitlines() if not l.startswith("#")).split(","))


def test_run_experiment_rejects_bad_inputs():
    cfg = parse_config(BASE_CFG)
    with pytest.raises(ParameterError):
        run_experiment(cfg, threads=0)
    empty = _steps_cfg(steps=((0, 5),))
    with pytest.raises(DomainError, match="came out empty"):
        run_experiment(empty)
    undefined = _steps_cfg(statistic=maxk(5000), steps=((2, 3),))
    with pytest.raises(DomainError, match="nothing to score"):
        run_experiment(undefined)


def test_write_csv_formatting():
    rows = [
        ResultRow("e1", "buckethist", 0.5, 12.25, 3.5, 0.125, 100, ""),
        ResultRow("e1", "sanpoints", 0.5, 1.0, 1.0, 0.0, 100, "a, b"),
    ]
    buf = io.StringIO()
    write_csv(rows, ["note one", "note two"], buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "# note one"
    assert lines[1] == "# note two"
    assert lines[2] == ",".join(CSV_COLUMNS)
    assert lines[3] == "e1,buckethist,0.5,12.250000,3.500000,0.125000,100,"
    assert lines[4] == 'e1,sanpoints,0.5,1.000000,1.000000,0.000000,100,"a, b"'


def test_mechanism_roster():
    assert MECHANISMS == ("buckethist", "expmech", "ptr", "smoothsens",
                          "bnshist", "sanpoints")
    assert 0 < DEFAULT_DELTA < 1 and 0 < DEFAULT_DROP_BUDGET < 1
