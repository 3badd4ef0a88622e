import io
import json

import numpy as np
import pytest

from weightmax.estimators import EstimatorConfig
from weightmax.exceptions import ConfigurationError, ShapeError
from weightmax.network import GradientEstimate, init_params
from weightmax.trainer import (
    CURVE_COLUMNS,
    SUMMARY_COLUMNS,
    AdamState,
    TrainConfig,
    adam_step,
    running_average,
    sweep,
    train_run,
    write_curves_csv,
    write_summary_csv,
)


def quick(**kw):
    base = dict(layer_sizes=(8, 8, 1), k=1, episodes=1600, batch_size=16, seed=3)
    base.update(kw)
    return TrainConfig(**base)


def test_adam_first_step_moves_by_step_size():
    params = init_params((2, 2, 1), "constant_zero")
    grad = GradientEstimate([np.array([[1.0, -2.0], [0.0, 3.0]]), np.array([[0.5, -0.5]])], [np.array([1.0, -1.0]), np.array([0.0])])
    new, state = adam_step(params, AdamState.zeros_like(params), grad, 0.01)
    assert state.t == 1
    np.testing.assert_allclose(new.weights[0], 0.01 * np.sign(grad.weights[0]), atol=1e-8)
    assert new.biases[1][0] == 0.0
    assert np.all(params.weights[0] == 0)


def test_adam_matches_reference_recursion():
    rng = np.random.default_rng(0)
    params = init_params((1, 1), seed=0)
    theta = params.arrays()
    m = [np.zeros_like(a) for a in theta]
    v = [np.zeros_like(a) for a in theta]
    state = AdamState.zeros_like(params)
    for t in range(1, 6):
        g = [rng.normal(size=a.shape) for a in theta]
        params, state = adam_step(params, state, GradientEstimate([g[0]], [g[1]]), 0.1)
        for i in range(2):
            m[i] = 0.9 * m[i] + 0.1 * g[i]
            v[i] = 0.999 * v[i] + 0.001 * g[i] ** 2
            theta[i] = theta[i] + 0.1 * (m[i] / (1 - 0.9**t)) / (np.sqrt(v[i] / (1 - 0.999**t)) + 1e-8)
    for a, b in zip(params.arrays(), theta):
        np.testing.assert_allclose(a, b, rtol=1e-12)


def test_adam_weight_decay_and_shape_check():
    params = init_params((1, 1), "uniform_range:1", seed=1)
    zero = GradientEstimate([np.zeros((1, 1))], [np.zeros(1)])
    new, _ = adam_step(params, AdamState.zeros_like(params), zero, 0.01, weight_decay=0.1)
    assert abs(new.weights[0][0, 0]) < abs(params.weights[0][0, 0])
    with pytest.raises(ShapeError):
        adam_step(params, AdamState.zeros_like(params), GradientEstimate([np.zeros((2, 1))], [np.zeros(2)]), 0.01)


def test_running_average_window():
    x = np.arange(10.0)
    ra = running_average(x, 3)
    assert ra[0] == 0.0 and ra[1] == 0.5
    np.testing.assert_allclose(ra[2:], [np.mean(x[i - 2 : i + 1]) for i in range(2, 10)])
    rng = np.random.default_rng(0)
    y = rng.choice([-1.0, 1.0], 500)
    assert running_average(y, 50)[-1] == pytest.approx(y[-50:].mean())


def test_config_validation():
    with pytest.raises(ConfigurationError):
        quick(layer_sizes=(0, 1))
    with pytest.raises(ConfigurationError):
        quick(batch_size=0)
    with pytest.raises(ConfigurationError):
        quick(episodes=4)
    with pytest.raises(ConfigurationError):
        quick(step_size=0)
    with pytest.raises(ConfigurationError):
        TrainConfig.from_dict({"layer_size": [3]})
    with pytest.raises(ConfigurationError):
        train_run(quick(layer_sizes=(4, 2)))


def test_config_dict_roundtrip(tmp_path):
    cfg = quick(estimator=EstimatorConfig("unbiased_wm", uwm_variant="mc:5"), weight_decay=0.01)
    data = cfg.to_dict()
    assert data["estimator"] == "unbiased_wm" and data["uwm_variant"] == "mc:5"
    path = tmp_path / "c.json"
    path.write_text(json.dumps(data))
    assert TrainConfig.from_json(path) == cfg
    assert TrainConfig.from_dict({"layer_sizes": "4,4,1"}).layer_sizes == (4, 4, 1)
    path.write_text("{not json")
    with pytest.raises(ConfigurationError):
        TrainConfig.from_json(path)


@pytest.mark.parametrize("kind", ["reinforce", "ste", "weight_max", "p_order", "unbiased_wm", "backprop"])
def test_every_rule_trains(kind):
    result = train_run(quick(estimator=EstimatorConfig(kind, p=2)))
    curve = result.curve
    assert curve.episode[-1] == 1600 and curve.episode.size == 100
    assert np.all(np.abs(curve.batch_reward) <= 1)
    assert -1 <= curve.final_running_avg <= 1
    assert result.params.layer_sizes == (3, 8, 8, 1)


def test_runs_are_reproducible():
    a = train_run(quick(estimator=EstimatorConfig("unbiased_wm")))
    b = train_run(quick(estimator=EstimatorConfig("unbiased_wm")))
    assert a.curve.to_csv() == b.curve.to_csv()
    for x, y in zip(a.params.arrays(), b.params.arrays()):
        np.testing.assert_array_equal(x, y)
    c = train_run(quick(estimator=EstimatorConfig("unbiased_wm"), seed=4))
    assert c.curve.to_csv() != a.curve.to_csv()


def test_learning_on_k1_multiplexer():
    result = train_run(quick(estimator=EstimatorConfig("unbiased_wm"), episodes=40_000, running_avg_window=4000))
    assert result.curve.final_running_avg > 0.6


def test_log_every_thins_curve():
    curve = train_run(quick(log_every=7)).curve
    assert curve.episode[-1] == 1600
    assert curve.episode[0] == 7 * 16
    text = curve.to_csv()
    assert text.splitlines()[0] == ",".join(CURVE_COLUMNS)
    buf = io.StringIO()
    curve.to_csv(buf)
    assert buf.getvalue() == text


def test_sweep_schema():
    configs = [quick(), quick(layer_sizes=(4, 4, 1), estimator=EstimatorConfig("ste"))]
    entries = sweep(configs, runs_per_config=1)
    assert [(e.label, e.N) for e in entries] == [("unbiased_wm", 8), ("ste", 4)]
    summary = write_summary_csv(entries).splitlines()
    assert summary[0] == ",".join(SUMMARY_COLUMNS)
    assert len(summary) == 3
    assert summary[1].split(",")[4] == "0.0"  # std over a single run
    curves = write_curves_csv(entries).splitlines()
    assert len(curves) == 1 + 2 * 100
    with pytest.raises(ConfigurationError):
        sweep(configs, runs_per_config=0)


def test_sweep_seeds_differ_and_parallel_matches_serial():
    entries = sweep([quick(episodes=320)], runs_per_config=2)
    a, b = entries[0].runs
    assert a.config.seed == 3 and b.config.seed == 4
    assert a.curve.to_csv() != b.curve.to_csv()
    par = sweep([quick(episodes=320)], runs_per_config=2, n_jobs=2)
    assert [r.curve.to_csv() for r in par[0].runs] == [a.curve.to_csv(), b.curve.to_csv()]
