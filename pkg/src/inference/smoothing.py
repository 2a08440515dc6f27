"""Smoothed-state quantities from an SMC² state: regenerated genealogies and record probabilities."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from src.errors import InvalidParameterError, TrajectoryNotStoredError
from src.inference.smc2 import Smc2State, WeightedJointSample, exchange_step, select_trajectories
from src.models.schema import RecordProbabilities
from src.rng import Purpose, RngStream

log = logging.getLogger(__name__)


def regenerate_filters(state: Smc2State, observations: np.ndarray, rng: RngStream) -> Smc2State:
    """Copy of ``state`` whose filters are rerun on y_{1:t} with full storage.

    Swapping in fresh filters is an exchange move: every θ-weight is multiplied
    by Ẑ_new / Ẑ_old. The copy is meant for smoothing output only.
    """
    config = state.config.model_copy(update={"trajectory_store": True, "exchange_mode": "importance"})
    regenerated = exchange_step(
        replace(state, config=config), state.n_x, observations, rng.split(Purpose.REGENERATE)
    )
    log.info("t=%d: regenerated %d filters with trajectory storage", state.t, regenerated.cloud.size)
    return regenerated


def smoothed_sample(
    state: Smc2State, rng: RngStream, observations: Optional[np.ndarray] = None
) -> WeightedJointSample:
    """Full-trajectory joint sample, regenerating genealogies if they were not stored."""
    if not state.config.trajectory_store:
        if observations is None:
            raise TrajectoryNotStoredError("trajectories not stored and no data given to regenerate them")
        state = regenerate_filters(state, observations, rng)
    return select_trajectories(state, rng, full=True)


def record_probabilities(
    state: Smc2State,
    thresholds: Sequence[float],
    at: int,
    rng: RngStream,
    observations: Optional[np.ndarray] = None,
) -> RecordProbabilities:
    """P(y_at <= y | data) for each threshold y, from selected smoothed trajectories.

    With two or more thresholds, ``conditional`` is p(thresholds[0]) / p(thresholds[1]).
    """
    if not hasattr(state.model, "record_probability"):
        raise InvalidParameterError(f"model {state.model.name!r} has no record probability")
    if not 1 <= at <= state.t:
        raise InvalidParameterError(f"record time {at} outside 1..{state.t}")

    sample = smoothed_sample(state, rng, observations)
    W = sample.norm_weights
    per_theta = np.zeros((len(W), len(thresholds)))
    for m, (theta, path) in enumerate(zip(sample.thetas, sample.states)):
        if W[m] == 0.0:
            continue
        mu = path[at - 1, 0]
        per_theta[m] = [float(state.model.record_probability(theta, mu, y)) for y in thresholds]

    probabilities = W @ per_theta
    conditional = None
    if len(thresholds) >= 2 and probabilities[1] > 0:
        conditional = float(probabilities[0] / probabilities[1])
    return RecordProbabilities(
        t=at,
        thresholds=[float(y) for y in thresholds],
        probabilities=probabilities.tolist(),
        conditional=conditional,
        log_weights=sample.log_weights.tolist(),
        per_theta=per_theta.tolist(),
    )
