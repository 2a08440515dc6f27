"""Exception hierarchy shared by the samplers, the models and the CLI."""

from __future__ import annotations

import numpy as np


class Smc2Error(Exception):
    """Base class for every error raised by this package."""


class InvalidParameterError(Smc2Error, ValueError):
    """A distribution or model parameter is outside its valid range."""


class DegenerateWeightsError(Smc2Error):
    """All weights are zero (or NaN): nothing left to normalise or resample."""


class FilterDegenerateError(Smc2Error):
    """Every inner particle fell outside the observation support."""

    def __init__(self, theta, t: int):
        self.theta = np.asarray(theta, dtype=float)
        self.t = t
        super().__init__(f"particle filter degenerate at t={t} for theta={self.theta.tolist()}")


class InvalidObservationError(Smc2Error, ValueError):
    """An observation violates the model's structural constraints."""


class KalmanError(Smc2Error):
    """The innovation covariance could not be factorised."""

    def __init__(self, t: int, innovation_cov, reason: str = ""):
        self.t = t
        self.innovation_cov = np.asarray(innovation_cov)
        msg = f"innovation covariance not positive definite at t={t}: {self.innovation_cov.tolist()}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)


class TrajectoryNotStoredError(Smc2Error):
    """Full trajectories were requested but the filters keep only x_t."""


class ConfigError(Smc2Error):
    """The experiment configuration is invalid."""


class DataError(Smc2Error):
    """Reading or writing a data file failed."""

    def __init__(self, path, reason: str):
        self.path = path
        super().__init__(f"{path}: {reason}")


# Exit codes: 0 ok, 1 other failure, 2 config, 3 data / IO, 4 numerical degeneracy
EXIT_CODES = (
    (ConfigError, 2, "Config error"),
    (DataError, 3, "Data error"),
    ((DegenerateWeightsError, FilterDegenerateError, KalmanError), 4, "Numerical degeneracy"),
)


def exit_code(exc: Smc2Error) -> tuple[int, str]:
    """Process exit code and label for a package error."""
    for kinds, code, label in EXIT_CODES:
        if isinstance(exc, kinds):
            return code, label
    return 1, "Error"
