"""Pydantic models for experiment configs and the records a run writes."""

from __future__ import annotations

from pathlib import Path
from typing import Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, model_validator

from src.config import (
    DATA_DIR,
    DEFAULT_ACCEPTANCE_THRESHOLD,
    DEFAULT_ESS_THRESHOLD,
    DEFAULT_GROWTH_FACTOR,
    DEFAULT_N_THETA,
    DEFAULT_N_X,
    DEFAULT_N_X_MAX,
    OUTPUT_DIR,
    SEED,
    THREADS,
)
from src.errors import ConfigError
from src.models.priors import PriorSpec

ModelName = Literal["lg", "sv1", "sv2", "sv2-leverage", "athletics"]
Algorithm = Literal["smc2", "ibis", "pmmh", "pf", "kalman", "simulate"]


# --- Experiment config (what the YAML file holds) ---


class ModelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: ModelName
    priors: dict[str, PriorSpec] = Field(default_factory=dict)
    options: dict[str, float] = Field(default_factory=dict)
    true_theta: dict[str, float] = Field(default_factory=dict)  # used by simulate


class Smc2Config(BaseModel):
    """Outer-sampler settings; IBIS reads n_theta, ess_threshold, moves, proposal and transform."""

    model_config = ConfigDict(extra="forbid")

    n_theta: int = Field(DEFAULT_N_THETA, ge=2)
    n_x: int = Field(DEFAULT_N_X, ge=1)
    ess_threshold: float = Field(DEFAULT_ESS_THRESHOLD, gt=0, lt=1)
    acceptance_threshold: float = Field(DEFAULT_ACCEPTANCE_THRESHOLD, gt=0, lt=1)
    growth_factor: float = Field(DEFAULT_GROWTH_FACTOR, gt=1)
    n_x_max: int = Field(DEFAULT_N_X_MAX, ge=1)
    moves: int = Field(1, ge=1)
    proposal: Literal["independent", "random_walk"] = "independent"
    rw_scale: Optional[float] = Field(None, gt=0)
    trajectory_store: bool = False
    inner_resampling: Literal["multinomial", "systematic"] = "multinomial"
    auto_nx: bool = True
    exchange_mode: Literal["importance", "metropolis"] = "importance"
    transform: bool = True

    @model_validator(mode="after")
    def _cap_above_start(self) -> "Smc2Config":
        if self.n_x_max < self.n_x:
            raise ValueError(f"n_x_max ({self.n_x_max}) must be >= n_x ({self.n_x})")
        return self


class PmmhConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n_x: int = Field(DEFAULT_N_X, ge=1)
    n_iter: int = Field(1000, ge=1)
    burn_in: float = Field(0.2, ge=0, lt=1)
    adapt: bool = True
    init_scale: float = Field(0.1, gt=0)
    init_retries: int = Field(100, ge=1)
    transform: bool = True


class SimulateConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T: int = Field(100, ge=0)
    output: Optional[str] = None
    missing: list[int] = Field(default_factory=list)  # 1-based times written as empty rows

    @model_validator(mode="after")
    def _missing_in_range(self) -> "SimulateConfig":
        if any(not 1 <= t <= self.T for t in self.missing):
            raise ValueError(f"missing times must lie in 1..{self.T}")
        return self


class DataConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    path: Optional[str] = None
    raw_prices: bool = False

    def resolved(self) -> Optional[Path]:
        """The data file; relative paths fall back to the data directory."""
        if self.path is None:
            return None
        p = Path(self.path)
        if p.is_absolute() or p.exists():
            return p
        return DATA_DIR / p


class RecordsConfig(BaseModel):
    """Record-probability query: P(y_t <= threshold) at a given time index."""

    model_config = ConfigDict(extra="forbid")

    thresholds: list[float] = Field(min_length=1)
    at: int = Field(ge=1)


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: ModelConfig
    algorithm: Algorithm = "smc2"
    smc2: Smc2Config = Field(default_factory=Smc2Config)
    pmmh: PmmhConfig = Field(default_factory=PmmhConfig)
    theta: dict[str, float] = Field(default_factory=dict)  # fixed θ for pf / kalman
    simulate: SimulateConfig = Field(default_factory=SimulateConfig)
    data: DataConfig = Field(default_factory=DataConfig)
    checkpoints: list[int] = Field(default_factory=list)
    records: Optional[RecordsConfig] = None
    seed: int = Field(SEED, ge=0)
    threads: int = Field(THREADS, ge=1)
    output_dir: str = str(OUTPUT_DIR)

    @model_validator(mode="after")
    def _check_paths(self, info: ValidationInfo) -> "ExperimentConfig":
        if any(t < 1 for t in self.checkpoints):
            raise ValueError("checkpoint times must be >= 1")
        simulating = self.algorithm == "simulate" or (info.context or {}).get("simulate", False)
        if not simulating:
            path = self.data.resolved()
            if path is None:
                raise ValueError(f"algorithm {self.algorithm!r} needs data.path")
            if not path.exists():
                raise ValueError(f"data file not found: {path}")
        return self

    @classmethod
    def load(cls, path: str | Path, simulate: bool = False, **overrides) -> "ExperimentConfig":
        """Parse a YAML config; ``overrides`` replace top-level keys (e.g. seed).

        ``simulate`` skips the data-file check, since simulation creates it.
        """
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text()) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        raw.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return cls.model_validate(raw, context={"simulate": simulate})
        except ValidationError as exc:
            raise ConfigError(f"{path}: {exc}") from exc


# --- Run records (what we write) ---


class StepDiagnostics(BaseModel):
    t: int
    log_Lhat_t: float
    cum_log_evidence: float
    ess: Optional[float] = None
    resampled: Optional[bool] = None
    acceptance_rate: Optional[float] = None
    n_x: Optional[int] = None
    exchanged: Optional[bool] = None
    inner_ess_mean: Optional[float] = None
    inner_ess_min: Optional[float] = None
    wall_ms: Optional[float] = None


class ParameterSummary(BaseModel):
    mean: float
    var: float
    q05: float
    q95: float


class RunSummary(BaseModel):
    algorithm: Algorithm
    model: ModelName
    seed: int
    T: int
    log_evidence: Optional[float] = None
    final_n_x: Optional[int] = None
    n_rejuvenations: Optional[int] = None
    acceptance_rate: Optional[float] = None
    posterior: dict[str, ParameterSummary] = Field(default_factory=dict)
    checkpoints: dict[str, dict[str, ParameterSummary]] = Field(default_factory=dict)
    runtime_s: float = 0.0
    config: dict = Field(default_factory=dict)


class SimulationTruth(BaseModel):
    model: ModelName
    theta: dict[str, float]
    state_names: list[str]
    states: list[list[float]]


class RecordProbabilities(BaseModel):
    """Estimated P(y_t <= y | data) per threshold, plus the per-θ values behind it."""

    t: int
    thresholds: list[float]
    probabilities: list[float]
    conditional: Optional[float] = None  # p(thresholds[0]) / p(thresholds[1])
    log_weights: list[float]
    per_theta: list[list[float]]
