import json

import numpy as np
import pytest

from weightmax.exceptions import ConfigurationError, DomainError, ShapeError
from weightmax.network import (
    GradientEstimate,
    NetworkParams,
    UnitAddress,
    backprop_deltas,
    backprop_deterministic,
    forward_deterministic,
    forward_sample,
    importance_ratio,
    init_params,
    load_checkpoint,
    outgoing_logits,
    save_checkpoint,
)


def test_init_shapes_and_ranges():
    params = init_params((5, 4, 3, 1), seed=0)
    assert params.layer_sizes == (5, 4, 3, 1)
    assert [w.shape for w in params.weights] == [(4, 5), (3, 4), (1, 3)]
    assert np.all(np.abs(params.weights[0]) <= 1 / np.sqrt(5))
    wide = init_params((2, 3, 1), "uniform_range:2.5", seed=0)
    assert np.all(np.abs(wide.weights[0]) <= 2.5) and np.abs(wide.weights[0]).max() > 1
    zero = init_params((2, 3, 1), "constant_zero")
    assert all(np.all(a == 0) for a in zero.arrays())


def test_init_rejects_bad_sizes():
    with pytest.raises(ConfigurationError):
        init_params((3, 0, 1))
    with pytest.raises(ConfigurationError):
        init_params((3,))
    with pytest.raises(ConfigurationError):
        init_params((3, 2, 1), "gaussian")


def test_params_validate_chaining():
    with pytest.raises(ShapeError):
        NetworkParams([np.zeros((2, 3)), np.zeros((1, 3))], [np.zeros(2), np.zeros(1)])
    with pytest.raises(ConfigurationError):
        NetworkParams([np.full((1, 1), np.nan)], [np.zeros(1)])


def test_arrays_roundtrip(small_params):
    again = NetworkParams.from_arrays(small_params.arrays())
    for a, b in zip(again.arrays(), small_params.arrays()):
        np.testing.assert_array_equal(a, b)


def test_forward_sample_is_binary_and_reproducible(small_params, rng):
    x = np.ones((10, 3))
    t1 = forward_sample(small_params, x, np.random.default_rng(5))
    t2 = forward_sample(small_params, x, np.random.default_rng(5))
    for a, b in zip(t1.activations, t2.activations):
        np.testing.assert_array_equal(a, b)
        assert set(np.unique(a)) <= {0.0, 1.0}
    assert t1.batch_size == 10 and t1.kind == "stochastic"
    np.testing.assert_allclose(t1.firing_probs[0], 1 / (1 + np.exp(-(x @ small_params.weights[0].T + small_params.biases[0]))))


def test_forward_sample_frequency_matches_probability():
    params = NetworkParams([np.zeros((1, 0))], [np.array([0.8])])
    trace = forward_sample(params, np.zeros((20000, 0)), np.random.default_rng(0))
    assert trace.activations[0].mean() == pytest.approx(1 / (1 + np.exp(-0.8)), abs=0.01)


def test_forward_rejects_wrong_width(small_params, rng):
    with pytest.raises(ShapeError):
        forward_sample(small_params, np.ones((2, 4)), rng)


def test_forward_deterministic_uses_probabilities(small_params):
    x = np.ones((4, 3))
    trace = forward_deterministic(small_params, x)
    assert trace.kind == "deterministic"
    np.testing.assert_array_equal(trace.activations[0], trace.firing_probs[0])
    sampled = forward_deterministic(small_params, x, np.random.default_rng(0))
    assert set(np.unique(sampled.activations[-1])) <= {0.0, 1.0}


def test_backprop_matches_finite_differences(small_params):
    x = np.array([[0.2, -0.5, 1.0]])

    def objective(p):
        out = forward_deterministic(p, x).firing_probs[-1]
        return float(out[0] @ np.array([1.0, -2.0]))

    trace = forward_deterministic(small_params, x)
    p_out = trace.firing_probs[-1]
    grad = backprop_deltas(small_params, trace, np.array([[1.0, -2.0]]) * p_out * (1 - p_out))
    eps = 1e-6
    for layer in range(small_params.n_layers):
        for j in range(small_params.layer_sizes[layer + 1]):
            up, down = small_params.copy(), small_params.copy()
            up.biases[layer][j] += eps
            down.biases[layer][j] -= eps
            fd = (objective(up) - objective(down)) / (2 * eps)
            assert grad[layer][0, j] == pytest.approx(fd, rel=1e-6, abs=1e-9)


def test_backprop_deterministic_zeroes_output_layer(small_params):
    trace = forward_deterministic(small_params, np.ones((3, 3)))
    g = backprop_deterministic(small_params, trace, np.ones((3, 2)))
    assert isinstance(g, GradientEstimate)
    assert np.all(g.weights[-1] == 0) and np.all(g.biases[-1] == 0)
    assert np.any(g.biases[0] != 0)


def test_gradient_from_deltas_batch_mean(small_trace):
    deltas = [np.ones((32, n)) for n in (4, 3, 2)]
    g = GradientEstimate.from_deltas(small_trace, deltas)
    np.testing.assert_allclose(g.biases[0], np.ones(4))
    np.testing.assert_allclose(g.weights[0], np.tile(small_trace.inputs.mean(axis=0), (4, 1)))
    assert g.flat().size == sum(a.size for a in g.arrays())
    assert g.is_finite()


def test_outgoing_logits_and_ratio(small_params, small_trace):
    addr = UnitAddress(0, 1)
    h = small_trace.activations[0][:, 1]
    terms = outgoing_logits(small_params, small_trace, addr, h)
    np.testing.assert_allclose(terms.weight * h[:, None] + terms.offset, small_trace.pre_activations[1])
    np.testing.assert_allclose(importance_ratio(small_params, small_trace, addr, h), 1.0)
    r = importance_ratio(small_params, small_trace, addr, 0.5)
    assert r.shape == (32,) and np.all(r > 0)
    with pytest.raises(DomainError):
        outgoing_logits(small_params, small_trace, (2, 0), 0.0)


def test_checkpoint_roundtrip(tmp_path, small_params):
    path = tmp_path / "ckpt.json"
    save_checkpoint(path, small_params, seed=99)
    data = json.loads(path.read_text())
    assert data["format"] == "weightmax-checkpoint" and data["layer_sizes"] == [3, 4, 3, 2]
    params, seed = load_checkpoint(path)
    assert seed == 99
    for a, b in zip(params.arrays(), small_params.arrays()):
        np.testing.assert_array_equal(a, b)


def test_checkpoint_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"format": "other"}))
    with pytest.raises(ConfigurationError):
        load_checkpoint(path)
