"""Observation files: CSV with a ``t,y1..yk`` header, empty cells for missing rows."""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from src.errors import DataError
from src.models.schema import SimulationTruth

log = logging.getLogger(__name__)

RETURN_SCALE = 10.0**2.5


def _cell(v: float) -> str:
    return "" if np.isnan(v) else format(float(v), ".17g")


def write_observations(path: str | Path, ys: np.ndarray, obs_dim: int | None = None) -> Path:
    """Write (T, obs_dim) observations; t is 1-based."""
    path = Path(path)
    ys = np.asarray(ys, dtype=float)
    dim = obs_dim if obs_dim is not None else (ys.shape[1] if ys.ndim == 2 else 1)
    ys = ys.reshape(-1, dim)
    header = ",".join(["t"] + [f"y{i + 1}" for i in range(dim)])
    lines = [header] + [
        ",".join([str(t + 1)] + [_cell(v) for v in row]) for t, row in enumerate(ys)
    ]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise DataError(path, f"cannot write observations: {exc}") from exc
    log.info("Wrote %d observations to %s", len(ys), path)
    return path


def read_observations(path: str | Path) -> np.ndarray:
    """Read a file written by ``write_observations`` into a (T, obs_dim) array."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise DataError(path, f"cannot read observations: {exc}") from exc

    rows = [line for line in text.splitlines() if line.strip()]
    if not rows:
        raise DataError(path, "empty file, expected a header row")
    header = [c.strip() for c in rows[0].split(",")]
    if header[0] != "t" or len(header) < 2:
        raise DataError(path, f"expected header 't,y1,...', got {rows[0]!r}")
    dim = len(header) - 1
    if len(rows) == 1:
        return np.empty((0, dim))

    try:
        table = np.genfromtxt(path, delimiter=",", skip_header=1, ndmin=2)
    except ValueError as exc:
        raise DataError(path, f"malformed row: {exc}") from exc
    if table.shape[1] != dim + 1:
        raise DataError(path, f"expected {dim + 1} columns, got {table.shape[1]}")
    return table[:, 1:]


def log_returns(prices, scale: float = RETURN_SCALE) -> np.ndarray:
    """y_t = scale * log(s_t / s_{t-1}) as a (T-1, 1) array."""
    s = np.asarray(prices, dtype=float).reshape(-1)
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        raise DataError("<prices>", "prices must be finite and positive")
    return (scale * np.diff(np.log(s))).reshape(-1, 1)


def load_data(path: str | Path, raw_prices: bool = False) -> np.ndarray:
    ys = read_observations(path)
    if raw_prices:
        if ys.shape[1] != 1:
            raise DataError(path, "raw prices must be a single column")
        ys = log_returns(ys[:, 0])
    return ys


def truth_path(csv_path: str | Path) -> Path:
    csv_path = Path(csv_path)
    return csv_path.with_name(f"{csv_path.stem}.truth.json")


def write_truth(csv_path: str | Path, truth: SimulationTruth) -> Path:
    path = truth_path(csv_path)
    try:
        path.write_text(truth.model_dump_json(indent=2))
    except OSError as exc:
        raise DataError(path, f"cannot write truth file: {exc}") from exc
    return path


def read_truth(csv_path: str | Path) -> SimulationTruth:
    path = truth_path(csv_path)
    try:
        return SimulationTruth.model_validate_json(path.read_text())
    except OSError as exc:
        raise DataError(path, f"cannot read truth file: {exc}") from exc
    except ValidationError as exc:
        raise DataError(path, f"malformed truth file: {exc.error_count()} error(s)") from exc
