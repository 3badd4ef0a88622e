"""Episode generators.

A task samples batches of inputs and scores the network's binary output
layer. Outputs ``H`` in ``{0, 1}`` map to actions ``2H - 1`` in ``{-1, +1}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive_int
from .exceptions import ConfigurationError, DomainError, ShapeError


@dataclass
class Episode:
    input: np.ndarray
    correct_output: int


class Task:
    """Interface every environment implements."""

    input_dim: int
    output_dim: int = 1

    def sample_batch(self, rng: np.random.Generator, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(inputs (n, input_dim), targets (n,))``."""
        raise NotImplementedError

    def batch_reward(self, targets: np.ndarray, outputs: np.ndarray) -> np.ndarray:
        """Rewards for binary output activations ``outputs`` of shape ``(n, output_dim)``."""
        actions = 2.0 * np.asarray(outputs, dtype=float)[:, 0] - 1.0
        return np.where(actions == targets, 1.0, -1.0)


def to_action(h) -> int:
    """Binary output unit value to ``{-1, +1}``."""
    if h not in (0, 1, 0.0, 1.0):
        raise DomainError(f"output activation must be 0 or 1, got {h!r}")
    return 2 * int(h) - 1


class MultiplexerTask(Task):
    """k-bit multiplexer: ``k`` address bits (most significant first) select one of ``2^k`` data bits.

    The input is ``[address bits..., data bits...]``, drawn uniformly from
    ``{0, 1}^(k + 2^k)``; the correct output is ``2 * data[address] - 1``.
    """

    def __init__(self, k: int = 4):
        self.k = check_positive_int(k, "multiplexer k")
        self.input_dim = self.k + 2**self.k

    def __repr__(self) -> str:
        return f"MultiplexerTask(k={self.k})"

    def correct_outputs(self, inputs: np.ndarray) -> np.ndarray:
        x = np.asarray(inputs)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise ShapeError(f"multiplexer k={self.k} expects inputs of width {self.input_dim}")
        powers = 2 ** np.arange(self.k - 1, -1, -1)
        address = (x[:, : self.k] > 0.5).astype(int) @ powers
        data = x[np.arange(x.shape[0]), self.k + address]
        return 2.0 * (data > 0.5) - 1.0

    def sample_batch(self, rng, n):
        inputs = (rng.random((n, self.input_dim)) < 0.5).astype(float)
        return inputs, self.correct_outputs(inputs)

    def sample_input(self, rng) -> Episode:
        inputs, target = self.sample_batch(rng, 1)
        return Episode(inputs[0], int(target[0]))

    def reward(self, episode: Episode, network_output: int) -> float:
        if network_output not in (-1, 1):
            raise DomainError(f"network output must be -1 or +1, got {network_output!r}")
        return 1.0 if network_output == episode.correct_output else -1.0


class DatasetTask(Task):
    """Episodes drawn uniformly from the rows of ``X`` with ``+-1`` targets ``y``."""

    def __init__(self, X: np.ndarray, y: np.ndarray):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise ShapeError("X must be 2-D with one target per row")
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ConfigurationError("DatasetTask targets must be -1 or +1")
        self.X, self.y = X, y
        self.input_dim = X.shape[1]

    def sample_batch(self, rng, n):
        idx = rng.integers(0, self.X.shape[0], size=n)
        return self.X[idx], self.y[idx]


def make_task(name: str = "multiplexer", k: int = 4) -> Task:
    if name != "multiplexer":
        raise ConfigurationError(f"unknown task {name!r}; only 'multiplexer' is available")
    return MultiplexerTask(k)
