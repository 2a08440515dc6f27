from __future__ import annotations

from functools import partial
from typing import Optional

from src.errors import ConfigError
from src.models.athletics import athletics_model
from src.models.base import StateSpaceModel, is_missing
from src.models.linear_gaussian import lg_model
from src.models.priors import PriorSpec
from src.models.volatility import sv1_model, svm_model

FACTORIES = {
    "lg": lg_model,
    "sv1": sv1_model,
    "sv2": partial(svm_model, leverage=False),
    "sv2-leverage": partial(svm_model, leverage=True),
    "athletics": athletics_model,
}
MODEL_NAMES = tuple(FACTORIES)


def build_model(
    name: str,
    priors: Optional[dict[str, PriorSpec]] = None,
    options: Optional[dict] = None,
) -> StateSpaceModel:
    """Instantiate a built-in model by its config name."""
    factory = FACTORIES.get(name)
    if factory is None:
        raise ConfigError(f"unknown model {name!r}; expected one of {', '.join(MODEL_NAMES)}")
    options = dict(options or {})
    if "overrides" in options or "leverage" in options:
        raise ConfigError(f"{name}: bad model options {sorted(options)}")
    try:
        return factory(priors, **options)
    except TypeError as exc:
        raise ConfigError(f"{name}: bad model options {sorted(options)}") from exc
