"""Pipeline settings shared by every subcommand.

Settings come from an optional TOML file (top level or a ``[focalforge]``
table). ``FOCALFORGE_JOBS`` overrides the file's job limit, and explicit
command-line flags override both.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .context import ALL_LEVELS, DEFAULT_BUDGET, ContextLevel
from .corpus import DEDUP_MODES, DEFAULT_FRACTIONS, check_fractions

JOBS_ENV = "FOCALFORGE_JOBS"


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    budget: int = DEFAULT_BUDGET
    levels: tuple[ContextLevel, ...] = ALL_LEVELS
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS
    seed: int = 0
    dedup: str = "whitespace"
    api_lists: str | None = None
    runner: str | None = None
    jobs: int = 1

    def __post_init__(self):
        if not isinstance(self.budget, int) or self.budget < 1:
            raise ConfigError("budget must be an integer >= 1")
        try:
            object.__setattr__(self, "fractions", check_fractions(self.fractions))
            object.__setattr__(self, "levels", parse_levels(self.levels))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        if self.dedup not in DEDUP_MODES:
            raise ConfigError(f"dedup must be one of {', '.join(DEDUP_MODES)}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")

    def override(self, **changes) -> PipelineConfig:
        return replace(self, **{k: v for k, v in changes.items() if v is not None})


def parse_levels(levels) -> tuple[ContextLevel, ...]:
    if isinstance(levels, str):
        levels = [levels] if levels.strip() != "all" else [l.value for l in ALL_LEVELS]
    out = []
    for level in levels:
        if isinstance(level, str) and level.strip() == "all":
            out.extend(ALL_LEVELS)
        else:
            out.append(level if isinstance(level, ContextLevel) else ContextLevel.parse(level))
    return tuple(dict.fromkeys(out))


def load_config(path: str | Path | None = None, environ=os.environ) -> PipelineConfig:
    data: dict = {}
    if path is not None:
        from ._toml import load_toml

        raw = load_toml(path)
        data = raw.get("focalforge", raw)
        known = {f.name for f in fields(PipelineConfig)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{path}: unknown settings {sorted(unknown)}")
        data = {k: tuple(v) if isinstance(v, list) else v for k, v in data.items()}
    if environ.get(JOBS_ENV):
        try:
            data["jobs"] = int(environ[JOBS_ENV])
        except ValueError:
            raise ConfigError(f"{JOBS_ENV} must be an integer") from None
    return PipelineConfig(**data)
