"""Run configuration shared by the CLI commands.

Values resolve with the precedence flags > config file > defaults; the
config file is a flat JSON object using the field names below.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from pathlib import Path

from efk.errors import ConfigError

__all__ = ["RunConfig"]

_OPERATORS = ("sobel", "roberts", "laplace")


@dataclass(frozen=True)
class RunConfig:
    """Numeric defaults for batch runs.

    ``window_ms`` is the event-window duration, ``slices`` the time-slice
    count of the polarity integration, ``omega`` the local-correlation
    window, ``operator`` the edge extractor, ``min_diag`` the ground-truth
    diagonal floor in pixels, ``seed`` the generator seed for anything
    randomized (demo weights).
    """

    window_ms: float = 100.0
    slices: int = 10
    omega: int = 9
    operator: str = "sobel"
    min_diag: float = 30.0
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.window_ms > 0:
            raise ConfigError(f"window_ms must be positive, got {self.window_ms}")
        if self.slices < 1:
            raise ConfigError(f"slices must be >= 1, got {self.slices}")
        if self.omega < 3 or self.omega % 2 == 0:
            raise ConfigError(f"omega must be odd and >= 3, got {self.omega}")
        if self.operator not in _OPERATORS:
            raise ConfigError(
                f"operator must be one of {_OPERATORS}, got {self.operator!r}"
            )
        if not self.min_diag >= 0:
            raise ConfigError(f"min_diag must be >= 0, got {self.min_diag}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        """Defaults overlaid with the JSON object at ``path``."""
        try:
            raw = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc.msg}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**raw)

    def override(self, **kwargs) -> "RunConfig":
        """A copy with every non-None kwarg applied (flag precedence)."""
        updates = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **updates) if updates else self

    @property
    def window_us(self) -> int:
        return int(round(self.window_ms * 1000.0))
