"""Batch entrypoint: run the experiment named by SMC2_CONFIG, unattended.

Usage:  SMC2_CONFIG=config/sv1.yml python -m src.entrypoint
"""

from __future__ import annotations

import logging
import sys

from src.config import CONFIG_PATH, LOG_LEVEL
from src.errors import Smc2Error, exit_code
from src.models.schema import ExperimentConfig
from src.pipeline import run

logging.basicConfig(
    level=LOG_LEVEL,
    format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
)
log = logging.getLogger(__name__)


def main() -> int:
    if not CONFIG_PATH:
        log.error("SMC2_CONFIG is not set")
        return 2
    try:
        config = ExperimentConfig.load(CONFIG_PATH)
        summary = run(config)
    except Smc2Error as exc:
        code, label = exit_code(exc)
        log.error("%s: %s", label, exc)
        return code
    log.info("Finished %s on %s: log evidence %s", summary.algorithm, summary.model, summary.log_evidence)
    return 0


if __name__ == "__main__":
    sys.exit(main())
