"""Exact computations on networks small enough to enumerate.

Every joint binary configuration of the units is materialised as one row of a
batched :class:`~weightmax.network.ForwardTrace`, together with its
probability. Expectations of any estimator then reduce to a weighted sum over
rows; the expectation over the uniform points ``U`` of unbiased Weight
Maximization is taken with Gauss-Legendre quadrature.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._validation import check_unit_address
from .estimators import EstimatorConfig, UWMVariant, bias_deltas
from .exceptions import CapacityError, DomainError, ShapeError
from .math_kernel import log_sigmoid, sigmoid
from .network import ForwardTrace, GradientEstimate, NetworkParams, UnitAddress, init_params

MAX_UNITS = 24
DEFAULT_NODES = 64
STUDY_COLUMNS = ("estimator", "C", "trial", "bias", "variance", "quadrature_error")


@dataclass
class EnumerableTask:
    """Deterministic reward for each output configuration.

    ``reward_table[k]`` is the reward when the output bits, read with unit 0 as
    the most significant bit, spell the integer ``k``.
    """

    reward_table: np.ndarray
    input: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.reward_table = np.asarray(self.reward_table, dtype=float).reshape(-1)
        self.input = np.asarray(self.input, dtype=float).reshape(-1)
        n = self.reward_table.size
        if n < 2 or n & (n - 1):
            raise ShapeError("reward_table must cover all 2^n_out output configurations")

    @property
    def n_outputs(self) -> int:
        return int(self.reward_table.size).bit_length() - 1

    def reward_of(self, outputs: np.ndarray) -> np.ndarray:
        outputs = np.asarray(outputs)
        powers = 2 ** np.arange(outputs.shape[1] - 1, -1, -1)
        return self.reward_table[(outputs > 0.5).astype(int) @ powers]


@dataclass
class Enumeration:
    trace: ForwardTrace
    prob: np.ndarray  # (C,) probability of each configuration
    factors: np.ndarray  # (C, U) each unit's own conditional probability
    reward: np.ndarray  # (C,)


@dataclass
class BiasVarianceReport:
    estimator: str
    bias: float
    variance: float
    mean: float
    exact: float
    target_unit: UnitAddress
    parameter: str = "bias"
    C: float | None = None
    trial: int | None = None
    quadrature_error: float = 0.0


def _bit_patterns(n: int) -> np.ndarray:
    idx = np.arange(2**n)
    return ((idx[:, None] >> np.arange(n - 1, -1, -1)[None, :]) & 1).astype(float)


def _check_capacity(params: NetworkParams) -> None:
    if params.n_units > MAX_UNITS:
        raise CapacityError(f"exact enumeration supports at most {MAX_UNITS} units, network has {params.n_units}")


def _enumerate_from(params: NetworkParams, start_layer: int, x0: np.ndarray, w0: np.ndarray):
    """Expand configurations of layers ``start_layer..`` from given layer inputs."""
    h, prob = x0, w0
    pre, probs, acts, factors = [], [], [], []
    for layer in range(start_layer, params.n_layers):
        w, b = params.weights[layer], params.biases[layer]
        z = h @ w.T + b
        bits = _bit_patterns(w.shape[0])
        n_prev, n_pat = z.shape[0], bits.shape[0]
        z = np.repeat(z, n_pat, axis=0)
        d = np.tile(bits, (n_prev, 1))
        fac = np.where(d > 0.5, sigmoid(z), sigmoid(-z))
        pre = [np.repeat(a, n_pat, axis=0) for a in pre] + [z]
        probs = [np.repeat(a, n_pat, axis=0) for a in probs] + [sigmoid(z)]
        acts = [np.repeat(a, n_pat, axis=0) for a in acts] + [d]
        factors = [np.repeat(a, n_pat, axis=0) for a in factors] + [fac]
        prob = np.repeat(prob, n_pat) * fac.prod(axis=1)
        h = d
    return pre, probs, acts, np.concatenate(factors, axis=1), prob


def enumerate_network(params: NetworkParams, task: EnumerableTask) -> Enumeration:
    """All ``2^U`` joint configurations with probabilities and rewards."""
    _check_capacity(params)
    if task.input.shape != (params.layer_sizes[0],):
        raise ShapeError(f"task input {task.input.shape} does not match input_dim={params.layer_sizes[0]}")
    if task.n_outputs != params.layer_sizes[-1]:
        raise ShapeError(f"reward table covers {task.n_outputs} outputs, network has {params.layer_sizes[-1]}")
    pre, probs, acts, factors, prob = _enumerate_from(params, 0, task.input[None, :], np.ones(1))
    inputs = np.repeat(task.input[None, :], prob.size, axis=0)
    trace = ForwardTrace(inputs, pre, probs, acts, kind="stochastic")
    reward = task.reward_of(acts[-1])
    trace.reward = reward
    return Enumeration(trace, prob, factors, reward)


def exact_expected_reward(params: NetworkParams, task: EnumerableTask) -> float:
    """``E[R]`` by summing over every joint configuration."""
    enum = enumerate_network(params, task)
    return float(enum.prob @ enum.reward)


def exact_gradient(params: NetworkParams, task: EnumerableTask) -> GradientEstimate:
    """Exact gradient of ``E[R]`` via the per-unit two-point decomposition.

    For unit ``j`` with pre-activation ``a_j`` only its own factor depends on
    ``b_j``; its derivative is ``(2H_j - 1) sigma'(a_j)``, so the gradient is
    the sum over configurations of (probability of all other factors) times
    that derivative times the reward.
    """
    enum = enumerate_network(params, task)
    fac = enum.factors
    n_conf, n_units = fac.shape
    ones = np.ones((n_conf, 1))
    prefix = np.concatenate([ones, np.cumprod(fac, axis=1)[:, :-1]], axis=1)
    suffix = np.concatenate([np.cumprod(fac[:, ::-1], axis=1)[:, ::-1][:, 1:], ones], axis=1)
    others = prefix * suffix
    dw, db = [], []
    col = 0
    trace = enum.trace
    for layer in range(params.n_layers):
        n = params.layer_sizes[layer + 1]
        z = trace.pre_activations[layer]
        h = trace.activations[layer]
        local = others[:, col : col + n] * (2.0 * h - 1.0) * sigmoid(z) * sigmoid(-z)
        contrib = local * enum.reward[:, None]
        db.append(contrib.sum(axis=0))
        dw.append(contrib.T @ trace.layer_input(layer))
        col += n
    return GradientEstimate(dw, db)


def natural_extension_value(params: NetworkParams, task: EnumerableTask, addr, u, context=None):
    """``E[R | H = u]`` for a hidden unit, with ``u`` passed on as a real value.

    ``context`` fixes the other activations of the unit's layer. Without it the
    unit must sit in the first layer, where its siblings are independent of it
    and are marginalised. ``u`` may be any real (the extension is analytic),
    scalar or array.
    """
    _check_capacity(params)
    addr = check_unit_address(params.layer_sizes, addr)
    if addr.layer == params.n_layers - 1:
        raise DomainError("the natural extension is defined for hidden units only")
    n = params.layer_sizes[addr.layer + 1]
    if context is not None:
        base = np.asarray(context, dtype=float).reshape(1, n)
        base_w = np.ones(1)
    elif addr.layer == 0:
        z = task.input @ params.weights[0].T + params.biases[0]
        base = _bit_patterns(n)
        base_w = np.where(base > 0.5, sigmoid(z), sigmoid(-z))
        base_w[:, addr.unit] = 1.0
        base_w = base_w.prod(axis=1)
        keep = base[:, addr.unit] == 0.0
        base, base_w = base[keep], base_w[keep]
    else:
        raise DomainError("units beyond the first layer need a context for their siblings")
    u_arr = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty(u_arr.shape)
    for idx, value in np.ndenumerate(u_arr):
        x0 = base.copy()
        x0[:, addr.unit] = value
        _, _, acts, _, prob = _enumerate_from(params, addr.layer + 1, x0, base_w)
        out[idx] = prob @ task.reward_of(acts[-1])
    return float(out[0]) if np.ndim(u) == 0 else out.reshape(np.shape(u))


def _uwm_factor_moments(params, trace, layer, nodes, weights):
    """Mean and second moment over ``U`` of ``f_ji(U) = h_j ratio_j(U) v_ij (d_i - sigma(z_i(U)))``.

    The factors depend only on the activations of ``layer`` and ``layer + 1``,
    so they are evaluated once per distinct pair and gathered back.
    """
    w_next = params.weights[layer + 1]
    h_all, d_all = trace.activations[layer], trace.activations[layer + 1]
    states, inverse = np.unique(np.concatenate([h_all, d_all], axis=1), axis=0, return_inverse=True)
    m = h_all.shape[1]
    h, d = states[:, :m], states[:, m:]
    z = h @ w_next.T + params.biases[layer + 1]
    sign = 2.0 * d - 1.0
    base = log_sigmoid(sign * z)
    alpha = 0.0
    beta = 0.0
    for x, wq in zip(nodes, weights):
        zu = z[:, None, :] + w_next.T[None, :, :] * (x - h)[:, :, None]
        ratio = np.exp((log_sigmoid(sign[:, None, :] * zu) - base[:, None, :]).sum(axis=2))
        f = h[:, :, None] * ratio[:, :, None] * w_next.T[None, :, :] * (d[:, None, :] - sigmoid(zu))
        alpha = alpha + wq * f
        beta = beta + wq * f[:, :, :, None] * f[:, :, None, :]
    inverse = inverse.reshape(-1)
    return alpha[inverse], beta[inverse]


def uwm_reward_moments(params: NetworkParams, trace: ForwardTrace, reward, n_draws: int = 1, n_nodes: int = DEFAULT_NODES):
    """Conditional first and second moments of UWM individual rewards.

    Given a (batched) trace, returns per layer ``mean[l]`` of shape ``(B, n_l)``
    and ``second[l]`` of shape ``(B, n_l, n_l)``, the expectation over every
    unit's uniform draws when each unit averages ``n_draws`` i.i.d. points.
    Draws of distinct units are independent, which makes off-diagonal entries
    factor through the means of the per-unit factors.
    """
    r = np.asarray(reward, dtype=float).reshape(-1)
    n_out = params.layer_sizes[-1]
    mean: list = [None] * params.n_layers
    second: list = [None] * params.n_layers
    mean[-1] = np.repeat(r[:, None], n_out, axis=1)
    second[-1] = np.repeat(np.repeat((r * r)[:, None, None], n_out, axis=1), n_out, axis=2)
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)
    nodes, weights = 0.5 * (nodes + 1.0), 0.5 * weights
    for layer in range(params.n_layers - 2, -1, -1):
        alpha, beta = _uwm_factor_moments(params, trace, layer, nodes, weights)
        mu, s = mean[layer + 1], second[layer + 1]
        mean[layer] = np.einsum("bji,bi->bj", alpha, mu)
        cross = np.einsum("bji,bik,blk->bjl", alpha, s, alpha)
        own = beta / n_draws + (1.0 - 1.0 / n_draws) * alpha[:, :, :, None] * alpha[:, :, None, :]
        diag = np.einsum("bjik,bik->bj", own, s)
        idx = np.arange(alpha.shape[1])
        cross[:, idx, idx] = diag
        second[layer] = cross
    return mean, second


def estimator_bias_variance(params: NetworkParams, task: EnumerableTask, config: EstimatorConfig, addr=(0, 0), n_nodes: int = DEFAULT_NODES) -> BiasVarianceReport:
    """Exact bias and variance of one estimator at a unit's bias parameter."""
    addr = check_unit_address(params.layer_sizes, addr)
    enum = enumerate_network(params, task)
    trace, prob, reward = enum.trace, enum.prob, enum.reward
    exact = float(exact_gradient(params, task).biases[addr.layer][addr.unit])
    score = trace.activations[addr.layer][:, addr.unit] - trace.firing_probs[addr.layer][:, addr.unit]
    quad_err = 0.0
    variant = config.uwm_variant
    if config.kind == "unbiased_wm" and variant.kind in ("single", "mc"):
        expect = EstimatorConfig("unbiased_wm", uwm_variant=UWMVariant("gauss", n_nodes))
        x = bias_deltas(params, trace, reward, expect)[addr.layer][:, addr.unit]
        coarse = EstimatorConfig("unbiased_wm", uwm_variant=UWMVariant("gauss", max(1, n_nodes // 2)))
        x_coarse = bias_deltas(params, trace, reward, coarse)[addr.layer][:, addr.unit]
        quad_err = float(abs(prob @ x - prob @ x_coarse))
        n_draws = 1 if variant.kind == "single" else variant.M
        if addr.layer == params.n_layers - 1:
            second = (reward * score) ** 2
        else:
            _, moments = uwm_reward_moments(params, trace, reward, n_draws, n_nodes)
            second = moments[addr.layer][:, addr.unit, addr.unit] * score**2
    else:
        x = bias_deltas(params, trace, reward, config)[addr.layer][:, addr.unit]
        second = x**2
    mean = float(prob @ x)
    variance = float(prob @ second - mean**2)
    return BiasVarianceReport(config.label, mean - exact, variance, mean, exact, addr, quadrature_error=quad_err)


C4_TOPOLOGY = (0, 1, 4, 4, 4, 1)
C4_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)


def default_study_estimators() -> list[EstimatorConfig]:
    return [
        EstimatorConfig("reinforce"),
        EstimatorConfig("ste"),
        EstimatorConfig("weight_max"),
        EstimatorConfig("p_order", p=2),
        EstimatorConfig("unbiased_wm"),
    ]


def appendix_c4_study(
    C_grid: Sequence[float] = C4_GRID,
    trials: int = 20,
    seed: int = 0,
    estimators: Sequence[EstimatorConfig] | None = None,
    topology: Sequence[int] = C4_TOPOLOGY,
    n_nodes: int = DEFAULT_NODES,
) -> list[BiasVarianceReport]:
    """Bias/variance of each estimator at the first unit's bias over random networks.

    Trial ``t`` draws base parameters uniformly from ``[-1, 1]`` and rewards of
    the two output values uniformly from ``[-10, 10]``; parameter range ``C``
    scales the base draw, so every ``C`` sees the same trial shapes.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    estimators = list(estimators or default_study_estimators())
    reports = []
    children = np.random.SeedSequence(seed).spawn(trials)
    for trial, child in enumerate(children):
        rng = np.random.default_rng(child)
        base = init_params(topology, ("uniform_range", 1.0), seed=int(rng.integers(2**63)))
        table = rng.uniform(-10.0, 10.0, size=2 ** topology[-1])
        task = EnumerableTask(table, np.zeros(topology[0]))
        for c in C_grid:
            params = NetworkParams([c * w for w in base.weights], [c * b for b in base.biases])
            for config in estimators:
                rep = estimator_bias_variance(params, task, config, (0, 0), n_nodes)
                rep.C, rep.trial = float(c), trial
                reports.append(rep)
    return reports


def write_study_csv(reports: Iterable[BiasVarianceReport], fh=None) -> str:
    """Write ``estimator,C,trial,bias,variance,quadrature_error`` rows; returns the text."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(STUDY_COLUMNS)
    for rep in reports:
        writer.writerow([rep.estimator, repr(rep.C), rep.trial, repr(rep.bias), repr(rep.variance), repr(rep.quadrature_error)])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def summarize_study(reports: Iterable[BiasVarianceReport]) -> dict[tuple[str, float], dict[str, float]]:
    """Mean absolute bias and mean variance per ``(estimator, C)``."""
    groups: dict = {}
    for rep in reports:
        groups.setdefault((rep.estimator, rep.C), []).append(rep)
    return {
        key: {
            "abs_bias": float(np.mean([abs(r.bias) for r in reps])),
            "variance": float(np.mean([r.variance for r in reps])),
            "quadrature_error": float(max(r.quadrature_error for r in reps)),
        }
        for key, reps in groups.items()
    }
