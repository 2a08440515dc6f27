"""Deterministic, splittable random streams and the resampling primitives built on them.

A stream is a value: ``(seed, path)``. Children are derived by appending a tag
to the path, so the same logical consumer (particle m, time t, purpose p) always
receives the same draws, whatever order the work is executed in. Draws come
from a counter-based Philox generator seeded through ``numpy.random.SeedSequence``.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum
from typing import Literal, Union

import numpy as np

from src.errors import DegenerateWeightsError, InvalidParameterError


class Purpose(IntEnum):
    """Tags identifying what a child stream is used for."""

    PRIOR = 1
    INIT = 2
    PROPAGATE = 3
    RESAMPLE = 4
    MOVE = 5
    PROPOSE = 6
    FILTER = 7
    ACCEPT = 8
    EXCHANGE = 9
    SELECT = 10
    SIMULATE = 11
    CHAIN = 12
    CHECKPOINT = 13
    RECORDS = 14
    REGENERATE = 15


@dataclass(frozen=True)
class RngStream:
    """An immutable, splittable random stream."""

    seed: int
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if self.seed < 0 or any(tag < 0 for tag in self.path):
            raise InvalidParameterError("stream seed and tags must be non-negative integers")

    @property
    def stream_id(self) -> int:
        """64-bit identifier derived from the hierarchical path."""
        state = np.random.SeedSequence(0, spawn_key=self.path).generate_state(1, dtype=np.uint64)
        return int(state[0])

    def split(self, child_tag: int) -> RngStream:
        return RngStream(self.seed, self.path + (int(child_tag),))

    def generator(self) -> np.random.Generator:
        """A fresh generator positioned at the start of this stream."""
        seq = np.random.SeedSequence(self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(seq))


RngLike = Union[RngStream, np.random.Generator]


def split(parent: RngStream, child_tag: int) -> RngStream:
    return parent.split(child_tag)


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator()
    return rng


# ---------------------------------------------------------------------------
# Standard laws
# ---------------------------------------------------------------------------

DistName = Literal["uniform01", "std_normal", "exponential", "gamma", "poisson"]


def sample_standard(
    dist: DistName,
    rng: RngLike,
    *,
    rate: float | None = None,
    shape: float | None = None,
    mean: float | None = None,
    size: int | tuple[int, ...] | None = None,
):
    """Draw from one of the standard laws used by the model dynamics.

    ``exponential`` and ``gamma`` are parametrised by rate (mean 1/rate and
    shape/rate respectively); ``poisson`` by its mean.
    """
    gen = as_generator(rng)

    if dist == "uniform01":
        return gen.random(size)
    if dist == "std_normal":
        return gen.standard_normal(size)
    if dist == "exponential":
        if rate is None or not rate > 0:
            raise InvalidParameterError(f"exponential rate must be > 0, got {rate}")
        return gen.exponential(1.0 / rate, size)
    if dist == "gamma":
        if shape is None or not shape > 0:
            raise InvalidParameterError(f"gamma shape must be > 0, got {shape}")
        if rate is None or not rate > 0:
            raise InvalidParameterError(f"gamma rate must be > 0, got {rate}")
        return gen.gamma(shape, 1.0 / rate, size)
    if dist == "poisson":
        if mean is None or not mean >= 0:
            raise InvalidParameterError(f"poisson mean must be >= 0, got {mean}")
        return gen.poisson(mean, size)
    raise InvalidParameterError(f"unknown distribution tag: {dist!r}")


# ---------------------------------------------------------------------------
# Resampling
# ---------------------------------------------------------------------------

Scheme = Literal["multinomial", "systematic"]


def _cumulative(weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise DegenerateWeightsError("weights must be a non-empty vector")
    if np.any(np.isnan(w)) or np.any(w < 0):
        raise DegenerateWeightsError("weights must be non-negative numbers")
    total = w.sum()
    if not np.isfinite(total) or total <= 0:
        raise DegenerateWeightsError("all weights are zero")
    cdf = np.cumsum(w / total)
    cdf[-1] = 1.0
    return cdf


def resample_indices(weights, count: int, scheme: Scheme, rng: RngLike) -> np.ndarray:
    """Draw ``count`` ancestor indices (0-based) according to normalised weights."""
    cdf = _cumulative(weights)
    gen = as_generator(rng)
    if scheme == "multinomial":
        u = gen.random(count)
    elif scheme == "systematic":
        u = (gen.random() + np.arange(count)) / count
    else:
        raise InvalidParameterError(f"unknown resampling scheme: {scheme!r}")
    return np.searchsorted(cdf, u, side="right")
