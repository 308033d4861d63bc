"""Flat key-value run configuration.

One schema covers the reward pipeline and the trainer.  Values resolve with
command-line flags beating the config file beating built-in defaults; the
config file path comes from the EMPO_CONFIG environment variable (or the
--config flag).  Unknown keys anywhere are a startup error so typos cannot
silently fall back to defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .rewards import AdvantageConfig, GateConfig
from .simulator import OBJECTIVE_EMPO, OBJECTIVE_GRPO_ORACLE, TrainConfig

__all__ = ["RunConfig", "ConfigError", "CONFIG_ENV_VAR", "parse_config_file", "parse_bool"]

CONFIG_ENV_VAR = "EMPO_CONFIG"

JUDGE_RULE_BASED = "rule-based"
JUDGE_EXTERNAL = "external"


class ConfigError(ValueError):
    """Bad configuration: unknown key, bad value, or inconsistent settings."""


def parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class RunConfig:
    """Every knob of the pipeline and trainer, flat and overridable."""

    group_size: int = 8
    learning_rate: float = 0.5
    steps: int = 300
    inner_epochs: int = 1
    clip_eps: float = 0.2
    std_floor: float = 1e-6
    gate_enabled: bool = True
    gate_low: float = 0.05
    gate_high: float = 0.90
    gate_normalized: bool = True
    objective: str = OBJECTIVE_EMPO
    rng_seed: int = 0
    judge_mode: str = JUDGE_RULE_BASED
    judge_command: str = ""
    workers: int = 1

    def __post_init__(self) -> None:
        if self.objective not in (OBJECTIVE_EMPO, OBJECTIVE_GRPO_ORACLE):
            raise ConfigError(f"objective must be one of {OBJECTIVE_EMPO!r}, {OBJECTIVE_GRPO_ORACLE!r}")
        if self.judge_mode not in (JUDGE_RULE_BASED, JUDGE_EXTERNAL):
            raise ConfigError(f"judge_mode must be {JUDGE_RULE_BASED!r} or {JUDGE_EXTERNAL!r}")
        if self.judge_mode == JUDGE_EXTERNAL and not self.judge_command:
            raise ConfigError("judge_mode=external requires judge_command")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    def gate_config(self) -> GateConfig | None:
        if not self.gate_enabled:
            return None
        try:
            return GateConfig(low=self.gate_low, high=self.gate_high, normalized=self.gate_normalized)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def advantage_config(self) -> AdvantageConfig:
        try:
            return AdvantageConfig(clip_eps=self.clip_eps, std_floor=self.std_floor)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def train_config(self, check_gate_noop: bool = False) -> TrainConfig:
        try:
            return TrainConfig(
                group_size=self.group_size,
                learning_rate=self.learning_rate,
                steps=self.steps,
                inner_epochs=self.inner_epochs,
                clip_eps=self.clip_eps,
                gate=self.gate_config(),
                std_floor=self.std_floor,
                objective=self.objective,
                rng_seed=self.rng_seed,
                check_gate_noop=check_gate_noop,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _FIELDS[key].type
    try:
        if kind == "bool":
            return parse_bool(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return str(raw)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"bad value for {key}: {raw!r} ({exc})") from exc


def parse_config_file(path: str) -> dict:
    """Read ``key = value`` lines; '#' starts a comment."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                stripped = line.split("#", 1)[0].strip()
                if not stripped:
                    continue
                if "=" not in stripped:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, raw = (part.strip() for part in stripped.split("=", 1))
                if key not in _FIELDS:
                    raise ConfigError(f"{path}:{lineno}: unknown configuration key {key!r}")
                values[key] = _convert(key, raw)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def resolve_config(file_values: dict, flag_values: dict) -> RunConfig:
    """Merge precedence: flag beats file beats default."""
    for source in (file_values, flag_values):
        for key in source:
            if key not in _FIELDS:
                raise ConfigError(f"unknown configuration key {key!r}")
    merged = dict(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    return RunConfig(**merged)
