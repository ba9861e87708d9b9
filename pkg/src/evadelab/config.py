"""Flat key=value configuration shared by the command line tools.

A config file is a sequence of ``section.field = value`` lines with
``#`` comments. Unknown keys are rejected rather than ignored so typos
surface immediately.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .decoding import GenerationConfig
from .errors import ConfigError
from .experiments import GridSpec
from .optimizer import LoopConfig
from .rewards import RewardConfig
from .scorers import TASKS, ScorerBinding

_SECTIONS = ("generation", "reward", "loop", "grid")


@dataclass
class AppConfig:
    seed: int = 0
    paths: dict[str, str] = field(default_factory=dict)
    generation: GenerationConfig = field(default_factory=GenerationConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    loop: LoopConfig = field(default_factory=LoopConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    scorers: dict[str, ScorerBinding] = field(default_factory=dict)


def _convert(key: str, raw: str, template) -> object:
    kind = type(template)
    try:
        if kind is bool:
            lowered = raw.strip().casefold()
            if lowered not in ("true", "false"):
                raise ValueError(raw)
            return lowered == "true"
        if kind is int:
            return int(raw.strip())
        if kind is float:
            return float(raw.strip())
        if kind is str:
            return raw.strip()
        if kind is tuple:
            elem = template[0]
            parts = [p.strip() for p in raw.split(",") if p.strip()]
            return tuple(_convert(key, p, elem) for p in parts)
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None
    raise ConfigError(f"cannot set {key!r} from a config file")


def _set_section(section, overrides: dict[str, str], prefix: str):
    names = {f.name for f in dataclasses.fields(section)}
    converted = {}
    for name, raw in overrides.items():
        if name not in names:
            raise ConfigError(f"unknown key {prefix}.{name}")
        converted[name] = _convert(f"{prefix}.{name}", raw, getattr(section, name))
    return dataclasses.replace(section, **converted)


def _set_scorer(existing: ScorerBinding | None, task: str, overrides: dict[str, str]) -> ScorerBinding:
    base = existing or ScorerBinding(task=task)
    allowed = {"backend", "endpoint", "timeout_ms"}
    converted = {}
    for name, raw in overrides.items():
        if name not in allowed:
            raise ConfigError(f"unknown key scorer.{task}.{name}")
        converted[name] = _convert(f"scorer.{task}.{name}", raw, getattr(base, name))
    return dataclasses.replace(base, **converted)


def apply_settings(cfg: AppConfig, settings: dict[str, str]) -> AppConfig:
    """Return a copy of ``cfg`` with dotted-key overrides applied.

    Section dataclasses are rebuilt through their constructors, so
    range checks fire on the merged values.
    """
    grouped: dict[str, dict[str, str]] = {}
    scorer_grouped: dict[str, dict[str, str]] = {}
    paths = dict(cfg.paths)
    seed = cfg.seed
    for key, raw in settings.items():
        parts = key.split(".")
        if key == "seed":
            seed = int(_convert("seed", raw, 0))
        elif parts[0] == "paths" and len(parts) == 2:
            paths[parts[1]] = raw.strip()
        elif parts[0] in _SECTIONS and len(parts) == 2:
            grouped.setdefault(parts[0], {})[parts[1]] = raw
        elif parts[0] == "scorer" and len(parts) == 3:
            if parts[1] not in TASKS:
                raise ConfigError(f"unknown scorer task {parts[1]!r}")
            scorer_grouped.setdefault(parts[1], {})[parts[2]] = raw
        else:
            raise ConfigError(f"unknown key {key!r}")
    sections = {
        name: _set_section(getattr(cfg, name), grouped[name], name)
        for name in grouped
    }
    scorers = dict(cfg.scorers)
    for task, overrides in scorer_grouped.items():
        scorers[task] = _set_scorer(scorers.get(task), task, overrides)
    return dataclasses.replace(
        cfg, seed=seed, paths=paths, scorers=scorers, **sections
    )


def parse_config(text: str) -> dict[str, str]:
    """Parse key=value lines into a dict; later lines win."""
    settings: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, value = stripped.partition("=")
        settings[key.strip()] = value.strip()
    return settings


def load_config(path: str) -> AppConfig:
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    return apply_settings(AppConfig(), parse_config(text))
