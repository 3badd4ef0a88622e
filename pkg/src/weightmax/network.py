"""Layered networks of Bernoulli-logistic units.

Shapes follow one convention throughout: layer ``l`` holds a weight matrix of
shape ``(n_l, n_{l-1})`` and a bias vector of shape ``(n_l,)``, where ``n_{-1}``
is the input dimension (possibly zero). Traces are batched: every per-layer
array carries a leading episode axis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from ._validation import check_layer_sizes, check_unit_address
from .exceptions import ConfigurationError, DomainError, ShapeError
from .math_kernel import log_sigmoid, sigmoid

CHECKPOINT_FORMAT = "weightmax-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class NetworkParams:
    """Per-layer weights and biases.

    ``layer_sizes`` is ``(input_dim, n_0, n_1, ..., n_out)``.
    """

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need the same, non-zero number of weight and bias arrays")
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.biases = [np.asarray(b, dtype=float) for b in self.biases]
        fan_in = self.weights[0].shape[1]
        for layer, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or w.shape[1] != fan_in or b.shape != (w.shape[0],):
                raise ShapeError(f"layer {layer}: weight {w.shape} / bias {b.shape} do not chain")
            fan_in = w.shape[0]
        for w, b in zip(self.weights, self.biases):
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ConfigurationError("parameters must be finite")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    @property
    def n_units(self) -> int:
        return sum(self.layer_sizes[1:])

    def copy(self) -> "NetworkParams":
        return NetworkParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def arrays(self) -> list[np.ndarray]:
        """Flat list ``[W_0, b_0, W_1, b_1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @classmethod
    def from_arrays(cls, arrays: Sequence[np.ndarray]) -> "NetworkParams":
        return cls(list(arrays[0::2]), list(arrays[1::2]))


class UnitAddress(NamedTuple):
    layer: int
    unit: int


@dataclass
class ForwardTrace:
    """Sampled (or deterministic) activations for a batch of episodes.

    For stochastic traces ``activations`` are exactly 0 or 1 and
    ``firing_probs == sigmoid(pre_activations)``. For deterministic traces the
    hidden activations equal the firing probabilities and only the output layer
    is sampled.
    """

    inputs: np.ndarray
    pre_activations: list[np.ndarray]
    firing_probs: list[np.ndarray]
    activations: list[np.ndarray]
    kind: str = "stochastic"
    reward: np.ndarray | None = None

    @property
    def batch_size(self) -> int:
        return self.inputs.shape[0]

    def layer_input(self, layer: int) -> np.ndarray:
        return self.inputs if layer == 0 else self.activations[layer - 1]


def init_params(layer_sizes: Sequence[int], scheme="uniform_fan_in", seed: int = 0) -> NetworkParams:
    """Random parameters for a network with ``layer_sizes = (input_dim, n_0, ..., n_out)``.

    ``scheme`` is ``"uniform_fan_in"`` (uniform in ``+-1/sqrt(fan_in)``),
    ``"constant_zero"``, or ``("uniform_range", C)`` / ``"uniform_range:C"``
    for uniform draws from ``[-C, C]``. Layers with zero fan-in fall back to a
    unit fan-in for the ``uniform_fan_in`` scale.
    """
    sizes = check_layer_sizes(layer_sizes)
    kind, scale = _parse_scheme(scheme)
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        if kind == "constant_zero":
            weights.append(np.zeros((fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
            continue
        bound = 1.0 / np.sqrt(max(fan_in, 1)) if kind == "uniform_fan_in" else scale
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return NetworkParams(weights, biases)


def _parse_scheme(scheme) -> tuple[str, float]:
    if isinstance(scheme, (tuple, list)):
        name, value = scheme
    elif isinstance(scheme, str) and ":" in scheme:
        name, value = scheme.split(":", 1)
    else:
        name, value = scheme, None
    if name in ("uniform_fan_in", "constant_zero") and value is None:
        return name, 0.0
    if name == "uniform_range" and value is not None:
        c = float(value)
        if not np.isfinite(c) or c < 0:
            raise ConfigurationError(f"uniform_range needs a finite C >= 0, got {value!r}")
        return name, c
    raise ConfigurationError(f"unknown init scheme {scheme!r}")


def _as_batch(params: NetworkParams, inputs) -> np.ndarray:
    x = np.asarray(inputs, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.layer_sizes[0]:
        raise ShapeError(f"input of shape {np.shape(inputs)} does not match input_dim={params.layer_sizes[0]}")
    return x


def forward_sample(params: NetworkParams, inputs, rng: np.random.Generator) -> ForwardTrace:
    """Sample every unit layer by layer. ``inputs`` is ``(input_dim,)`` or ``(B, input_dim)``."""
    x = _as_batch(params, inputs)
    pre, probs, acts = [], [], []
    h = x
    for w, b in zip(params.weights, params.biases):
        z = h @ w.T + b
        p = sigmoid(z)
        h = (rng.random(p.shape) < p).astype(float)
        pre.append(z)
        probs.append(p)
        acts.append(h)
    return ForwardTrace(x, pre, probs, acts, kind="stochastic")


def forward_deterministic(params: NetworkParams, inputs, rng: np.random.Generator | None = None) -> ForwardTrace:
    """Hidden units emit ``sigmoid(w.x + b)``; the output layer stays Bernoulli.

    Without ``rng`` the output layer activations are left at their firing
    probabilities as well.
    """
    x = _as_batch(params, inputs)
    pre, probs, acts = [], [], []
    h = x
    last = params.n_layers - 1
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w.T + b
        p = sigmoid(z)
        if layer == last and rng is not None:
            h = (rng.random(p.shape) < p).astype(float)
        else:
            h = p
        pre.append(z)
        probs.append(p)
        acts.append(h)
    return ForwardTrace(x, pre, probs, acts, kind="deterministic")


def backprop_deterministic(params: NetworkParams, trace: ForwardTrace, output_grad) -> "GradientEstimate":
    """Batch-mean gradient of ``output_grad * z_out`` w.r.t. the hidden parameters.

    ``output_grad`` has shape ``(B,)`` or ``(B, n_out)``. The output layer's
    own entries are zero; callers train it separately (REINFORCE).
    """
    deltas = backprop_deltas(params, trace, output_grad)
    deltas[-1] = np.zeros_like(deltas[-1])
    return GradientEstimate.from_deltas(trace, deltas)


def backprop_deltas(params: NetworkParams, trace: ForwardTrace, output_grad) -> list[np.ndarray]:
    """Per-episode bias deltas; the last entry is ``output_grad`` itself."""
    if trace.kind != "deterministic":
        raise DomainError("backprop_deterministic needs a trace from forward_deterministic")
    g = np.asarray(output_grad, dtype=float)
    n_out = params.layer_sizes[-1]
    g = np.broadcast_to(g.reshape(trace.batch_size, -1), (trace.batch_size, n_out)).copy()
    deltas = [None] * params.n_layers
    deltas[-1] = g
    for layer in range(params.n_layers - 2, -1, -1):
        p = trace.firing_probs[layer]
        deltas[layer] = (deltas[layer + 1] @ params.weights[layer + 1]) * p * (1.0 - p)
    return deltas


@dataclass
class GradientEstimate:
    """Parameter increments congruent with :class:`NetworkParams`."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def from_deltas(cls, trace: ForwardTrace, deltas: Sequence[np.ndarray], weights=None) -> "GradientEstimate":
        """Average per-episode bias deltas; weight increments are ``delta x input``.

        ``weights`` (shape ``(B,)``) replaces the uniform batch mean, e.g. with
        configuration probabilities during enumeration.
        """
        if weights is None:
            weights = np.full(trace.batch_size, 1.0 / trace.batch_size)
        w = np.asarray(weights, dtype=float)
        dw, db = [], []
        for layer, delta in enumerate(deltas):
            wd = delta * w[:, None]
            dw.append(wd.T @ trace.layer_input(layer))
            db.append(wd.sum(axis=0))
        return cls(dw, db)

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


class OutgoingTerms(NamedTuple):
    """Per-episode quantities of the units fed by one hidden unit; shapes ``(B, m)``."""

    weight: np.ndarray  # v_i, broadcast over the batch
    offset: np.ndarray  # c_i + k_i: everything in the pre-activation except v_i * h
    outcome: np.ndarray  # sampled d_i
    prob: np.ndarray  # Pr(D_i = d_i | H = u)


def _check_hidden(params: NetworkParams, addr: UnitAddress) -> UnitAddress:
    addr = check_unit_address(params.layer_sizes, addr)
    if addr.layer == params.n_layers - 1:
        raise DomainError("the natural extension is defined for hidden units only")
    return addr


def outgoing_logits(params: NetworkParams, trace: ForwardTrace, addr, h_value) -> OutgoingTerms:
    """Conditional probabilities of the outgoing units with the unit's value replaced.

    Siblings in the same layer stay at their sampled values, so the
    outgoing pre-activation is ``v_i * u + offset_i``.
    """
    addr = _check_hidden(params, addr)
    v = params.weights[addr.layer + 1][:, addr.unit]
    h = trace.activations[addr.layer][:, addr.unit]
    z = trace.pre_activations[addr.layer + 1]
    offset = z - h[:, None] * v[None, :]
    u = np.broadcast_to(np.asarray(h_value, dtype=float), h.shape)
    zu = offset + v[None, :] * u[:, None]
    d = trace.activations[addr.layer + 1]
    prob = np.where(d > 0.5, sigmoid(zu), sigmoid(-zu))
    return OutgoingTerms(np.broadcast_to(v, d.shape), offset, d, prob)


def importance_ratio(params: NetworkParams, trace: ForwardTrace, addr, u) -> np.ndarray:
    """``prod_i Pr(D_i=d_i | H=u) / Pr(D_i=d_i | H=h)`` per episode, shape ``(B,)``."""
    addr = _check_hidden(params, addr)
    v = params.weights[addr.layer + 1][:, addr.unit]
    h = trace.activations[addr.layer][:, addr.unit]
    z = trace.pre_activations[addr.layer + 1]
    sign = 2.0 * trace.activations[addr.layer + 1] - 1.0
    u = np.broadcast_to(np.asarray(u, dtype=float), h.shape)
    zu = z + v[None, :] * (u - h)[:, None]
    return np.exp(np.sum(log_sigmoid(sign * zu) - log_sigmoid(sign * z), axis=1))


def save_checkpoint(path, params: NetworkParams, seed: int | None = None) -> None:
    """Write a JSON checkpoint; arrays are flattened row-major."""
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "layer_sizes": list(params.layer_sizes),
        "seed": seed,
        "weights": [w.ravel(order="C").tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


def load_checkpoint(path) -> tuple[NetworkParams, int | None]:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ConfigurationError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ConfigurationError(f"{path}: unsupported checkpoint version {doc.get('version')!r}")
    sizes = doc["layer_sizes"]
    weights = [np.asarray(w, dtype=float).reshape(n_out, n_in) for w, n_in, n_out in zip(doc["weights"], sizes[:-1], sizes[1:])]
    params = NetworkParams(weights, [np.asarray(b, dtype=float) for b in doc["biases"]])
    return params, doc.get("seed")
