"""Batched training with Adam ascent, learning curves, and multi-run sweeps."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from ._validation import check_positive_int
from .estimators import EstimatorConfig, UWMVariant, estimate
from .exceptions import ConfigurationError, ShapeError
from .network import GradientEstimate, NetworkParams, backprop_deltas, forward_deterministic, forward_sample, init_params
from .tasks import Task, make_task

CURVE_COLUMNS = ("episode", "batch_reward", "running_avg")
SUMMARY_COLUMNS = ("estimator", "N", "runs", "mean_avg_reward", "std_avg_reward", "mean_final_running_avg", "std_final_running_avg")
CURVES_COLUMNS = ("estimator", "N", "episode", "mean_running_avg", "std_running_avg")


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: NetworkParams) -> "AdamState":
        arrays = params.arrays()
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], 0)


def adam_step(
    params: NetworkParams,
    state: AdamState,
    grad: GradientEstimate,
    step_size: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
    weight_decay: float = 0.0,
) -> tuple[NetworkParams, AdamState]:
    """One bias-corrected Adam step in the ascent direction.

    ``weight_decay`` subtracts ``weight_decay * theta`` from the gradient.
    Inputs are not modified.
    """
    theta = params.arrays()
    g_all = grad.arrays()
    if len(g_all) != len(theta) or any(g.shape != p.shape for g, p in zip(g_all, theta)):
        raise ShapeError("gradient is not congruent with the parameters")
    t = state.t + 1
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    new_theta, new_m, new_v = [], [], []
    for p, g, m, v in zip(theta, g_all, state.m, state.v):
        if weight_decay:
            g = g - weight_decay * p
        m = beta1 * m + (1.0 - beta1) * g
        v = beta2 * v + (1.0 - beta2) * (g * g)
        new_theta.append(p + step_size * (m / bc1) / (np.sqrt(v / bc2) + epsilon))
        new_m.append(m)
        new_v.append(v)
    return NetworkParams.from_arrays(new_theta), AdamState(new_m, new_v, t)


@dataclass
class TrainConfig:
    """One training run.

    ``layer_sizes`` lists unit layers only (e.g. ``(16, 16, 1)``); the input
    dimension comes from the task. ``episodes`` is rounded down to whole
    batches. ``running_avg_window`` is in episodes.
    """

    layer_sizes: tuple[int, ...] = (64, 64, 1)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    task: str = "multiplexer"
    k: int = 4
    step_size: float = 0.005
    batch_size: int = 16
    episodes: int = 100_000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    running_avg_window: int = 10_000
    weight_decay: float = 0.0
    init: str = "uniform_fan_in"
    log_every: int = 1

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if not self.layer_sizes or any(s < 1 for s in self.layer_sizes):
            raise ConfigurationError(f"layer_sizes must be positive, got {self.layer_sizes}")
        if not isinstance(self.estimator, EstimatorConfig):
            raise ConfigurationError("estimator must be an EstimatorConfig")
        check_positive_int(self.batch_size, "batch_size")
        check_positive_int(self.running_avg_window, "running_avg_window")
        check_positive_int(self.log_every, "log_every")
        check_positive_int(self.episodes, "episodes")
        if self.episodes < self.batch_size:
            raise ConfigurationError("episodes must be at least batch_size")
        if not self.step_size > 0:
            raise ConfigurationError("step_size must be positive")
        if self.weight_decay < 0:
            raise ConfigurationError("weight_decay must be non-negative")

    @property
    def label(self) -> str:
        return self.estimator.label

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "estimator"}
        out["layer_sizes"] = list(self.layer_sizes)
        est = self.estimator
        out.update(estimator=est.kind, p=est.p, uwm_variant=str(est.uwm_variant), global_reward=est.global_reward)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        data = dict(data)
        est_keys = {"estimator", "p", "uwm_variant", "global_reward"}
        est = {k: data.pop(k) for k in list(data) if k in est_keys}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        kind = est.get("estimator", "unbiased_wm")
        if isinstance(kind, EstimatorConfig):
            estimator = kind
        else:
            estimator = EstimatorConfig(
                kind,
                p=est.get("p", 1),
                uwm_variant=UWMVariant.parse(est.get("uwm_variant", "single")),
                global_reward=bool(est.get("global_reward", False)),
            )
        if isinstance(data.get("layer_sizes"), str):
            data["layer_sizes"] = [int(s) for s in data["layer_sizes"].split(",") if s.strip()]
        return cls(estimator=estimator, **data)

    @classmethod
    def from_json(cls, path) -> "TrainConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(data, dict):
            raise ConfigurationError(f"{path}: expected a JSON object")
        return cls.from_dict(data)


@dataclass
class LearningCurve:
    episode: np.ndarray
    batch_reward: np.ndarray
    running_avg: np.ndarray
    average_reward: float

    @property
    def final_running_avg(self) -> float:
        return float(self.running_avg[-1])

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for e, b, r in zip(self.episode, self.batch_reward, self.running_avg):
            writer.writerow([int(e), repr(float(b)), repr(float(r))])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


@dataclass
class TrainResult:
    config: TrainConfig
    curve: LearningCurve
    params: NetworkParams


def running_average(batch_rewards: np.ndarray, window_batches: int) -> np.ndarray:
    """Mean of the last ``window_batches`` values (fewer at the start)."""
    x = np.asarray(batch_rewards, dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, x.size + 1)
    lo = np.maximum(idx - window_batches, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def _build(config: TrainConfig, task: Task | None):
    task = task or make_task(config.task, config.k)
    if config.layer_sizes[-1] != task.output_dim:
        raise ConfigurationError(f"task needs {task.output_dim} output unit(s), layer_sizes ends with {config.layer_sizes[-1]}")
    return task, (task.input_dim,) + config.layer_sizes


def train_run(config: TrainConfig, task: Task | None = None, params: NetworkParams | None = None) -> TrainResult:
    """Train for ``config.episodes`` episodes in batches, averaging each batch's estimates.

    Random streams for initialisation, inputs, unit sampling and the
    estimator's own draws are independent children of ``config.seed``.
    """
    task, sizes = _build(config, task)
    init_ss, task_ss, net_ss, est_ss = np.random.SeedSequence(config.seed).spawn(4)
    if params is None:
        params = init_params(sizes, config.init, seed=int(np.random.default_rng(init_ss).integers(2**63)))
    elif params.layer_sizes != sizes:
        raise ConfigurationError(f"initial parameters have sizes {params.layer_sizes}, expected {sizes}")
    task_rng, net_rng, est_rng = (np.random.default_rng(s) for s in (task_ss, net_ss, est_ss))
    est = config.estimator
    state = AdamState.zeros_like(params)
    n_batches = config.episodes // config.batch_size
    rewards = np.empty(n_batches)
    for i in range(n_batches):
        inputs, targets = task.sample_batch(task_rng, config.batch_size)
        if est.kind == "backprop":
            trace = forward_deterministic(params, inputs, net_rng)
            r = task.batch_reward(targets, trace.activations[-1])
            out_delta = r[:, None] * (trace.activations[-1] - trace.firing_probs[-1])
            grad = GradientEstimate.from_deltas(trace, backprop_deltas(params, trace, out_delta))
        else:
            trace = forward_sample(params, inputs, net_rng)
            r = task.batch_reward(targets, trace.activations[-1])
            grad = estimate(params, trace, r, est, rng=est_rng)
        rewards[i] = r.mean()
        params, state = adam_step(params, state, grad, config.step_size, config.beta1, config.beta2, config.epsilon, config.weight_decay)
    window = max(1, config.running_avg_window // config.batch_size)
    running = running_average(rewards, window)
    keep = np.arange(config.log_every - 1, n_batches, config.log_every)
    if keep.size == 0 or keep[-1] != n_batches - 1:
        keep = np.append(keep, n_batches - 1)
    episodes = (np.arange(n_batches) + 1) * config.batch_size
    curve = LearningCurve(episodes[keep], rewards[keep], running[keep], float(rewards.mean()))
    return TrainResult(config, curve, params)


@dataclass
class SweepEntry:
    label: str
    N: int
    runs: list[TrainResult]

    @property
    def average_rewards(self) -> np.ndarray:
        return np.array([r.curve.average_reward for r in self.runs])

    @property
    def final_running_avgs(self) -> np.ndarray:
        return np.array([r.curve.final_running_avg for r in self.runs])

    def curve_stats(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        stack = np.stack([r.curve.running_avg for r in self.runs])
        return self.runs[0].curve.episode, stack.mean(axis=0), stack.std(axis=0)


def _one(config: TrainConfig) -> TrainResult:
    return train_run(config)


def sweep(configs: Sequence[TrainConfig], runs_per_config: int = 5, n_jobs: int = 1) -> list[SweepEntry]:
    """Repeat each config with seeds ``seed, seed+1, ...`` and group the runs."""
    check_positive_int(runs_per_config, "runs_per_config")
    jobs = [replace(c, seed=c.seed + r) for c in configs for r in range(runs_per_config)]
    if n_jobs == 1:
        results = [_one(j) for j in jobs]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(_one)(j) for j in jobs)
    entries = []
    for i, c in enumerate(configs):
        chunk = results[i * runs_per_config : (i + 1) * runs_per_config]
        entries.append(SweepEntry(c.label, c.layer_sizes[0], chunk))
    return entries


def write_summary_csv(entries: Sequence[SweepEntry], fh=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_COLUMNS)
    for e in entries:
        avg, fin = e.average_rewards, e.final_running_avgs
        writer.writerow([e.label, e.N, len(e.runs), repr(float(avg.mean())), repr(float(avg.std())), repr(float(fin.mean())), repr(float(fin.std()))])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


def write_curves_csv(entries: Sequence[SweepEntry], fh=None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVES_COLUMNS)
    for e in entries:
        episodes, mean, std = e.curve_stats()
        for ep, m, s in zip(episodes, mean, std):
            writer.writerow([e.label, e.N, int(ep), repr(float(m)), repr(float(s))])
    text = buf.getvalue()
    if fh is not None:
        fh.write(text)
    return text


__all__ = [
    "AdamState",
    "adam_step",
    "TrainConfig",
    "LearningCurve",
    "TrainResult",
    "running_average",
    "train_run",
    "SweepEntry",
    "sweep",
    "write_summary_csv",
    "write_curves_csv",
]
