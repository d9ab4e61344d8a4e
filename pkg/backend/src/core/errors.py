"""
Exception hierarchy for uti2speech.

Every error carries a machine-readable ``code`` so the CLI can print a
single parseable line (``error\t<code>\t<message>``) on failure.
"""

from __future__ import annotations


class Uti2SpeechError(Exception):
    """Base class for all errors raised by the toolkit."""

    default_code = "error"

    def __init__(self, message: str, code: str | None = None) -> None:
        super().__init__(message)
        self.code = code or self.default_code

    def __str__(self) -> str:
        return self.args[0] if self.args else self.code


class FormatError(Uti2SpeechError):
    """Artifact on disk is malformed (wrong magic, truncated, bad metadata)."""

    default_code = "corrupt-file"


class SignalError(Uti2SpeechError):
    """Signal or feature matrix violates a processing precondition."""

    default_code = "invalid-input"


class ModelError(Uti2SpeechError):
    """CNN model, cache or training problem."""

    default_code = "invalid-input"


class PipelineError(Uti2SpeechError):
    """Stage wiring problem, e.g. a missing upstream artifact."""

    default_code = "stage-dependency"


class ConfigError(Uti2SpeechError):
    """Configuration could not be loaded or validated."""

    default_code = "invalid-config"
