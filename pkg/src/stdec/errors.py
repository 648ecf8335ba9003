"""Exception types shared across the package."""

from __future__ import annotations


class ConfigError(ValueError):
    """Invalid configuration or invalid inputs to a public entry point."""


class DecodeError(RuntimeError):
    """Misuse of the decode state machine; indicates a caller bug."""


class TraceError(ValueError):
    """A trace file failed structural or semantic validation."""

    def __init__(self, message: str, step: int | None = None):
        self.step = step
        if step is not None:
            message = f"step {step}: {message}"
        super().__init__(message)


class ReplayError(RuntimeError):
    """A scripted denoiser was queried for positions its trace cannot answer."""
