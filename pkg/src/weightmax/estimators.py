"""Per-episode gradient estimators for networks of Bernoulli-logistic units.

Every rule trains the output layer with REINFORCE. They differ in the signal a
hidden unit uses in place of the global reward:

* ``reinforce``   -- the global reward itself.
* ``ste``         -- straight-through feedback ``sum_i v_i delta_i`` scaled by ``sigma'``.
* ``weight_max``  -- individual reward ``H * sum_i Rhat_i v_i (D_i - p_i)``.
* ``p_order``     -- alternating Taylor series of ``r(1) - r(0)`` around ``h = 1``.
* ``unbiased_wm`` -- importance-weighted derivative at a uniform point ``U``.

All functions operate on a batched :class:`~weightmax.network.ForwardTrace`
and are vectorised over episodes and units of a layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._validation import check_positive_int, check_reward
from .exceptions import ConfigurationError, DomainError
from .math_kernel import P_MAX, composite_tf_sequence, sigmoid, sigmoid_derivative
from .network import ForwardTrace, GradientEstimate, NetworkParams

KINDS = ("reinforce", "ste", "weight_max", "p_order", "unbiased_wm")
WEIGHT_MAX_FAMILY = ("weight_max", "p_order", "unbiased_wm")


@dataclass(frozen=True)
class UWMVariant:
    """How ``E[r'(U)]`` is estimated for a hidden unit.

    ``single``        one uniform draw (the default rule)
    ``mc``            mean of ``M`` i.i.d. uniform draws
    ``rect``          midpoint rectangle rule on ``M`` subintervals
    ``gauss``         ``M``-node Gauss-Legendre rule (exact expectation, used by the oracle)
    ``at_activation`` ``U = H``; reduces to plain Weight Maximization
    """

    kind: str = "single"
    M: int = 1

    def __post_init__(self):
        if self.kind not in ("single", "mc", "rect", "gauss", "at_activation"):
            raise ConfigurationError(f"unknown UWM variant {self.kind!r}")
        if isinstance(self.M, bool) or not isinstance(self.M, (int, np.integer)) or self.M < 1:
            raise ConfigurationError(f"UWM variant needs M >= 1, got {self.M!r}")

    @classmethod
    def parse(cls, spec) -> "UWMVariant":
        if isinstance(spec, UWMVariant):
            return spec
        text = str(spec).strip().lower()
        name, _, count = text.partition(":")
        name = {"rectangle": "rect", "ni": "rect", "at_h": "at_activation"}.get(name, name)
        if name in ("single", "at_activation") and not count:
            return cls(name, 1)
        if name in ("mc", "rect", "gauss") and count:
            try:
                m = int(count)
            except ValueError as exc:
                raise ConfigurationError(f"bad sample count in UWM variant {spec!r}") from exc
            return cls(name, m)
        raise ConfigurationError(f"cannot parse UWM variant {spec!r}; use single, mc:M or rect:M")

    def __str__(self) -> str:
        return self.kind if self.kind in ("single", "at_activation") else f"{self.kind}:{self.M}"


@dataclass(frozen=True)
class EstimatorConfig:
    """Which learning rule to apply. ``kind="backprop"`` is accepted by the trainer only."""

    kind: str = "unbiased_wm"
    p: int = 1
    uwm_variant: UWMVariant = UWMVariant()
    global_reward: bool = False

    def __post_init__(self):
        if self.kind not in KINDS + ("backprop",):
            raise ConfigurationError(f"unknown estimator {self.kind!r}; choose from {KINDS + ('backprop',)}")
        check_positive_int(self.p, "order p")
        if self.p > P_MAX:
            raise ConfigurationError(f"order p={self.p} exceeds p_max={P_MAX}")
        object.__setattr__(self, "uwm_variant", UWMVariant.parse(self.uwm_variant))

    @property
    def label(self) -> str:
        if self.kind == "p_order":
            return f"p_order_{self.p}"
        if self.kind == "unbiased_wm" and self.uwm_variant.kind != "single":
            return f"unbiased_wm_{self.uwm_variant.kind}{self.uwm_variant.M}"
        return self.kind


@dataclass
class IndividualReward:
    """Per-layer individual rewards ``rhat[l]`` of shape ``(B, n_l)``.

    ``u_samples[l]`` holds the evaluation points used by unbiased Weight
    Maximization (shape ``(B, n_l, Q)``); ``derivative_stack[l]`` holds the
    ``(s, t)`` lists of p-order Weight Maximization.
    """

    rhat: list[np.ndarray]
    u_samples: list[np.ndarray | None] | None = None
    derivative_stack: list[tuple[list[np.ndarray], list[np.ndarray]] | None] | None = None


def _check_trace(params: NetworkParams, trace: ForwardTrace) -> None:
    if trace.kind != "stochastic":
        raise DomainError("estimators need a sampled trace (forward_sample)")
    if len(trace.activations) != params.n_layers:
        raise DomainError("trace does not belong to these parameters")


_EXP_CAP = 700.0


def _outcome_terms(z: np.ndarray, sign: np.ndarray):
    """``(1 + exp(-s z), s exp(-s z) / (1 + exp(-s z)))`` with ``s = 2d - 1``.

    The first term is ``1 / Pr(D = d | z)``; the second equals ``d - sigma(z)``.
    All Weight Maximization variants share this formula so that their results
    coincide bit for bit wherever they evaluate at the same point.
    """
    e = np.exp(-np.maximum(sign * z, -_EXP_CAP))
    denom = 1.0 + e
    return denom, sign * e / denom


def _residual_feedback(rhat_next: np.ndarray, resid: np.ndarray, w_next: np.ndarray) -> np.ndarray:
    """``sum_i rhat_i * resid_{j,i} * v_{ij}`` -> ``(B, m)``; ``resid`` is ``(B, m|1, n)``."""
    return ((rhat_next[:, None, :] * resid) * w_next.T[None, :, :]).sum(axis=2)


def _wm_layer(rhat_next, trace, layer, w_next):
    d = trace.activations[layer + 1]
    z = trace.pre_activations[layer + 1]
    h = trace.activations[layer]
    _, resid = _outcome_terms(z, 2.0 * d - 1.0)
    return h * _residual_feedback(rhat_next, resid[:, None, :], w_next)


def _p_order_layer(rhat_next, trace, layer, w_next, p_order):
    d = trace.activations[layer + 1]
    z = trace.pre_activations[layer + 1]
    h = trace.activations[layer]
    _, resid = _outcome_terms(z, 2.0 * d - 1.0)
    s = [_residual_feedback(rhat_next, resid[:, None, :], w_next)]
    t = [resid @ w_next]
    for k in range(2, p_order + 1):
        # d^k/dh^k log Pr(D_i | h) = -v_i^k sigma^(k-1)(z_i) for k >= 2
        neg_deriv = -sigmoid_derivative(k - 1, z)
        wk = w_next**k
        s.append((rhat_next * neg_deriv) @ wk)
        t.append(neg_deriv @ wk)
    tf = composite_tf_sequence(t, p_order - 1)
    total = None
    for k in range(1, p_order + 1):
        rk = None
        for j in range(1, k + 1):
            piece = math.comb(k - 1, j - 1) * s[j - 1] * tf[k - j]
            rk = piece if rk is None else rk + piece
        sign = 1 if k % 2 == 1 else -1
        term = sign * rk / math.factorial(k)
        total = term if total is None else total + term
    return h * total, (s, t)


def _uwm_points(variant: UWMVariant, h: np.ndarray, rng) -> list[tuple[np.ndarray, float]]:
    if variant.kind == "at_activation":
        return [(h, 1.0)]
    if variant.kind in ("single", "mc"):
        if rng is None:
            raise ConfigurationError("unbiased Weight Maximization needs an rng for sampled U")
        m = 1 if variant.kind == "single" else variant.M
        draws = rng.random(h.shape + (m,))
        return [(draws[..., q], 1.0 / m) for q in range(m)]
    if variant.kind == "rect":
        mids = (np.arange(variant.M) + 0.5) / variant.M
        return [(np.full(h.shape, u), 1.0 / variant.M) for u in mids]
    nodes, weights = np.polynomial.legendre.leggauss(variant.M)
    return [(np.full(h.shape, 0.5 * (x + 1.0)), 0.5 * w) for x, w in zip(nodes, weights)]


def _uwm_layer(rhat_next, trace, layer, w_next, variant, rng):
    d = trace.activations[layer + 1]
    z = trace.pre_activations[layer + 1]
    h = trace.activations[layer]
    points = _uwm_points(variant, h, rng)
    rhat = np.zeros_like(h)
    # rows with H = 0 carry no individual reward; only active units are evaluated
    bi, ji = np.nonzero(h)
    if bi.size:
        sign = 2.0 * d
        sign -= 1.0
        inv_prob_h = _outcome_terms(z, sign)[0][bi]
        z_act, sign = z[bi], sign[bi]
        w_act, r_act, h_act = w_next.T[ji], rhat_next[bi], h[bi, ji]
        acc = None
        for u, weight in points:
            zu = z_act + w_act * (u[bi, ji] - h_act)[:, None]
            inv_prob_u, resid = _outcome_terms(zu, sign)
            ratio = (inv_prob_h / inv_prob_u).prod(axis=1)
            r = weight * (ratio * ((r_act * resid) * w_act).sum(axis=1))
            acc = r if acc is None else acc + r
        rhat[bi, ji] = h_act * acc
    return rhat, np.stack([u for u, _ in points], axis=-1)


def individual_rewards(params: NetworkParams, trace: ForwardTrace, reward, config: EstimatorConfig, rng=None) -> IndividualReward:
    """Individual rewards of the Weight Maximization family, computed top-down.

    The output layer always receives the global reward. For ``unbiased_wm``
    the draws of ``U`` are taken from ``rng`` layer by layer, output side
    first, so equal streams give identical tables.
    """
    _check_trace(params, trace)
    if config.kind not in WEIGHT_MAX_FAMILY:
        raise DomainError(f"{config.kind} has no individual reward besides R itself")
    r = check_reward(reward, trace.batch_size)
    n_layers = params.n_layers
    rhat: list = [None] * n_layers
    u_samples: list = [None] * n_layers
    stacks: list = [None] * n_layers
    rhat[-1] = np.repeat(r[:, None], params.layer_sizes[-1], axis=1)
    for layer in range(n_layers - 2, -1, -1):
        w_next = params.weights[layer + 1]
        downstream = rhat[layer + 1]
        if config.global_reward:
            downstream = np.repeat(r[:, None], downstream.shape[1], axis=1)
        if config.kind == "weight_max":
            rhat[layer] = _wm_layer(downstream, trace, layer, w_next)
        elif config.kind == "p_order":
            rhat[layer], stacks[layer] = _p_order_layer(downstream, trace, layer, w_next, config.p)
        else:
            rhat[layer], u_samples[layer] = _uwm_layer(downstream, trace, layer, w_next, config.uwm_variant, rng)
    return IndividualReward(
        rhat,
        u_samples if config.kind == "unbiased_wm" else None,
        stacks if config.kind == "p_order" else None,
    )


def bias_deltas(params: NetworkParams, trace: ForwardTrace, reward, config: EstimatorConfig, rng=None) -> list[np.ndarray]:
    """Per-episode bias updates ``(B, n_l)`` for every layer."""
    _check_trace(params, trace)
    r = check_reward(reward, trace.batch_size)
    acts, probs = trace.activations, trace.firing_probs
    if config.kind == "reinforce":
        return [r[:, None] * (h - p) for h, p in zip(acts, probs)]
    if config.kind == "ste":
        deltas: list = [None] * params.n_layers
        deltas[-1] = r[:, None] * (acts[-1] - probs[-1])
        for layer in range(params.n_layers - 2, -1, -1):
            p = probs[layer]
            deltas[layer] = (deltas[layer + 1] @ params.weights[layer + 1]) * (p * (1.0 - p))
        return deltas
    if config.kind in WEIGHT_MAX_FAMILY:
        table = individual_rewards(params, trace, r, config, rng)
        return [rh * (h - p) for rh, h, p in zip(table.rhat, acts, probs)]
    raise ConfigurationError(f"estimator {config.kind!r} is not a sampled-trace estimator")


def estimate(params: NetworkParams, trace: ForwardTrace, reward, config: EstimatorConfig, rng=None, weights=None) -> GradientEstimate:
    """Batch-averaged (or ``weights``-averaged) gradient estimate."""
    return GradientEstimate.from_deltas(trace, bias_deltas(params, trace, reward, config, rng), weights)


def estimate_reinforce(params, trace, reward, weights=None) -> GradientEstimate:
    return estimate(params, trace, reward, EstimatorConfig("reinforce"), weights=weights)


def estimate_ste(params, trace, reward, weights=None) -> GradientEstimate:
    return estimate(params, trace, reward, EstimatorConfig("ste"), weights=weights)


def estimate_weight_max(params, trace, reward, weights=None) -> GradientEstimate:
    return estimate(params, trace, reward, EstimatorConfig("weight_max"), weights=weights)


def estimate_p_order(params, trace, reward, p: int, global_reward: bool = False, weights=None) -> GradientEstimate:
    config = EstimatorConfig("p_order", p=p, global_reward=global_reward)
    return estimate(params, trace, reward, config, weights=weights)


def estimate_unbiased_wm(params, trace, reward, variant="single", rng=None, weights=None) -> GradientEstimate:
    config = EstimatorConfig("unbiased_wm", uwm_variant=UWMVariant.parse(variant))
    return estimate(params, trace, reward, config, rng=rng, weights=weights)


def rhat_derivatives(v: np.ndarray, z: np.ndarray, d: np.ndarray, rhat_out: np.ndarray, order: int) -> list[np.ndarray]:
    """Unbiased estimates ``rhat^(1..order)`` of the derivatives of ``r`` at ``h``.

    For one hidden unit with outgoing weights ``v`` (shape ``(m,)``), outgoing
    pre-activations ``z`` and outcomes ``d`` (shape ``(B, m)``) and downstream
    rewards ``rhat_out`` (shape ``(B, m)``).
    """
    check_positive_int(order, "order")
    v = np.asarray(v, dtype=float)
    z, d, rhat_out = (np.atleast_2d(np.asarray(a, dtype=float)) for a in (z, d, rhat_out))
    resid = d - sigmoid(z)
    s = [(rhat_out * resid) @ v]
    t = [resid @ v]
    for k in range(2, order + 1):
        neg = -sigmoid_derivative(k - 1, z)
        s.append((rhat_out * neg) @ v**k)
        t.append(neg @ v**k)
    tf = composite_tf_sequence(t, order - 1)
    return [sum(math.comb(k - 1, j - 1) * s[j - 1] * tf[k - j] for j in range(1, k + 1)) for k in range(1, order + 1)]
