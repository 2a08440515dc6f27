"""Centralised configuration: runtime tunables read from env vars with safe defaults."""

import os
from pathlib import Path

DATA_DIR = Path(os.environ.get("SMC2_DATA_DIR", str(Path(__file__).parent.parent / "data")))
OUTPUT_DIR = Path(os.environ.get("SMC2_OUTPUT_DIR", str(Path(__file__).parent.parent / "runs")))

THREADS = int(os.environ.get("SMC2_THREADS", "1"))
SEED = int(os.environ.get("SMC2_SEED", "0"))
LOG_LEVEL = os.environ.get("SMC2_LOG_LEVEL", "INFO")

# Config file for the batch entrypoint
CONFIG_PATH = os.environ.get("SMC2_CONFIG")

# Defaults for the outer sampler (N_theta=1000, ESS threshold 50%, N_x starts at 100)
DEFAULT_N_THETA = 1000
DEFAULT_N_X = 100
DEFAULT_ESS_THRESHOLD = 0.5
DEFAULT_ACCEPTANCE_THRESHOLD = 0.20
DEFAULT_GROWTH_FACTOR = 2
DEFAULT_N_X_MAX = 12_800
