"""Logging setup shared by the CLI and ad-hoc scripts."""

import logging
import os

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s - %(message)s"
LOG_LEVEL_ENV = "UTI2SPEECH_LOG_LEVEL"


def setup_logging(level: str | int | None = None) -> None:
    """
    Configure the root logger once.

    Level resolution: explicit argument, then UTI2SPEECH_LOG_LEVEL, then INFO.
    """
    if level is None:
        level = os.environ.get(LOG_LEVEL_ENV, "INFO")
    if isinstance(level, str):
        level = level.upper()

    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)
    # numba/librosa chatter drowns the stage messages at DEBUG
    logging.getLogger("numba").setLevel(logging.WARNING)
