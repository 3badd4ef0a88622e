"""Input validation helpers shared across modules."""

from __future__ import annotations

import numbers
from typing import Sequence

import numpy as np

from .exceptions import BoundsError, ConfigurationError, ShapeError


def check_layer_sizes(layer_sizes: Sequence[int]) -> tuple[int, ...]:
    """``(input_dim, n_0, ..., n_out)``: input may be 0, unit layers must be positive."""
    try:
        sizes = tuple(int(s) for s in layer_sizes)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"layer sizes must be integers, got {layer_sizes!r}") from exc
    if len(sizes) < 2:
        raise ConfigurationError("need an input size and at least one layer of units")
    if sizes[0] < 0 or any(s < 1 for s in sizes[1:]):
        raise ConfigurationError(f"layer sizes must be positive (input may be 0), got {sizes}")
    return sizes


def check_positive_int(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ConfigurationError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_unit_address(layer_sizes: Sequence[int], addr):
    from .network import UnitAddress

    layer, unit = addr
    if not 0 <= layer < len(layer_sizes) - 1 or not 0 <= unit < layer_sizes[layer + 1]:
        raise BoundsError(f"unit address {tuple(addr)} outside network {tuple(layer_sizes)}")
    return UnitAddress(int(layer), int(unit))


def check_reward(reward, batch_size: int) -> np.ndarray:
    r = np.asarray(reward, dtype=float)
    if r.ndim == 0:
        r = np.full(batch_size, float(r))
    r = r.reshape(-1)
    if r.shape != (batch_size,):
        raise ShapeError(f"reward of shape {np.shape(reward)} for a batch of {batch_size}")
    if not np.all(np.isfinite(r)):
        raise ConfigurationError("rewards must be finite")
    return r


def check_binary(x, name: str = "activations") -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if not np.all((x == 0.0) | (x == 1.0)):
        raise ConfigurationError(f"{name} must be 0/1 valued")
    return x
