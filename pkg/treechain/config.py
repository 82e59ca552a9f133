"""Run configuration for the command line"""

from __future__ import annotations

import argparse
from dataclasses import asdict, dataclass, field
from typing import Any

from .const import (
    DEFAULT_DECAY_THRESHOLD,
    DEFAULT_EPS,
    DEFAULT_GROWTH_WINDOW,
    DEFAULT_H_MAX,
    DEFAULT_PR_DEPTH,
    DEFAULT_RATIO_MARGIN,
    DEFAULT_TOL,
    NumericMode,
)
from .formats import config_hash

# argparse destinations that never change a result
_PRESENTATION_KEYS = {"verbose", "quiet", "out", "no_timestamp", "func", "jobs"}


@dataclass(frozen=True)
class Thresholds:
    """Tolerances shared by the classifiers"""

    eps: float = DEFAULT_EPS
    tol: float = DEFAULT_TOL
    h_max: int = DEFAULT_H_MAX
    depth: int = DEFAULT_PR_DEPTH
    growth_window: int = DEFAULT_GROWTH_WINDOW
    decay_threshold: float = DEFAULT_DECAY_THRESHOLD
    ratio_margin: float = DEFAULT_RATIO_MARGIN

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> Thresholds:
        values = {
            name: getattr(args, name)
            for name in cls.__dataclass_fields__
            if getattr(args, name, None) is not None
        }

        return cls(**values)


@dataclass(frozen=True)
class RunConfig:
    """Everything that determines a run's output"""

    command: str
    mode: NumericMode = NumericMode.EXACT
    fmt: str = "json"
    timestamp: bool = True
    jobs: int = 1
    out: str | None = None
    params: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> RunConfig:
        params = {
            key: value
            for key, value in sorted(vars(args).items())
            if key not in _PRESENTATION_KEYS and key not in ("command", "exact", "format")
        }

        return cls(
            command=args.command,
            mode=NumericMode.EXACT if getattr(args, "exact", True) else NumericMode.FLOAT,
            fmt=getattr(args, "format", "json"),
            timestamp=not getattr(args, "no_timestamp", False),
            jobs=getattr(args, "jobs", 1),
            out=getattr(args, "out", None),
            params=params,
        )

    @property
    def is_exact(self) -> bool:
        return self.mode == NumericMode.EXACT

    def resolved(self) -> dict[str, Any]:
        """The result-relevant settings, echoed into every artifact header"""
        return {
            "command": self.command,
            "mode": self.mode.value,
            "format": self.fmt,
            **{key: value for key, value in self.params.items() if value is not None},
        }

    @property
    def config_hash(self) -> str:
        return config_hash(self.resolved())

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)
