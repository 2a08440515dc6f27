"""Prior specifications: config-level descriptions turned into scipy distributions."""

from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy import stats

from src.errors import InvalidParameterError


class PriorSpec(BaseModel):
    """One-dimensional prior on a model parameter.

    ``reflect`` puts the law on -θ instead of θ (e.g. an exponential prior on
    -ξ for a shape parameter that must be negative). ``fixed`` is a point mass:
    the parameter is then held by the model and left out of θ.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    dist: Literal["normal", "uniform", "exponential", "gamma", "fixed"]
    loc: float = 0.0
    scale: float = 1.0
    low: float = 0.0
    high: float = 1.0
    rate: float = 1.0
    shape: float = 1.0
    value: Optional[float] = None
    reflect: bool = False

    @model_validator(mode="after")
    def _check(self) -> "PriorSpec":
        if self.dist == "fixed" and self.value is None:
            raise ValueError("fixed prior needs a value")
        if self.dist == "normal" and self.scale <= 0:
            raise ValueError("normal prior needs scale > 0")
        if self.dist == "uniform" and not self.high > self.low:
            raise ValueError("uniform prior needs high > low")
        if self.dist in ("exponential", "gamma") and self.rate <= 0:
            raise ValueError(f"{self.dist} prior needs rate > 0")
        if self.dist == "gamma" and self.shape <= 0:
            raise ValueError("gamma prior needs shape > 0")
        return self

    @property
    def is_fixed(self) -> bool:
        return self.dist == "fixed"

    def frozen(self):
        """The scipy frozen distribution of the (unreflected) variable."""
        if self.dist == "normal":
            return stats.norm(loc=self.loc, scale=self.scale)
        if self.dist == "uniform":
            return stats.uniform(loc=self.low, scale=self.high - self.low)
        if self.dist == "exponential":
            return stats.expon(scale=1.0 / self.rate)
        if self.dist == "gamma":
            return stats.gamma(self.shape, scale=1.0 / self.rate)
        raise InvalidParameterError("a fixed prior has no density")

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.reflect:
            x = -x
        return self.frozen().logpdf(x)

    def rvs(self, gen: np.random.Generator, size=None):
        draw = self.frozen().rvs(size=size, random_state=gen)
        return -draw if self.reflect else draw

    def support(self) -> tuple[float, float]:
        lo, hi = self.frozen().support()
        return (-hi, -lo) if self.reflect else (float(lo), float(hi))


def normal(loc: float = 0.0, scale: float = 1.0) -> PriorSpec:
    return PriorSpec(dist="normal", loc=loc, scale=scale)


def uniform(low: float, high: float) -> PriorSpec:
    return PriorSpec(dist="uniform", low=low, high=high)


def exponential(rate: float, reflect: bool = False) -> PriorSpec:
    return PriorSpec(dist="exponential", rate=rate, reflect=reflect)


def gamma(shape: float, rate: float) -> PriorSpec:
    return PriorSpec(dist="gamma", shape=shape, rate=rate)


def fixed(value: float) -> PriorSpec:
    return PriorSpec(dist="fixed", value=value)
