"""Experiment configuration read from flat ``key = value`` files.

Lines starting with ``#`` are comments. Unknown keys and unparsable values
are collected and reported together rather than one at a time.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .trainer import ConfigError, TrainConfig

# keys a config file must state explicitly; everything else has a default
REQUIRED_KEYS = ("num_warpings", "dim", "eps_min", "eps_max", "seed")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


@dataclass
class ExperimentConfig(TrainConfig):
    eval_codes: int = 100
    eval_steps: int = 10
    eval_eps: float = 0.0  # 0 means eps_max / 2
    eval_samples: int = 2000
    eval_seed: int = 1
    output_dir: str = "runs"

    @property
    def walk_eps(self) -> float:
        return self.eval_eps if self.eval_eps > 0 else self.eps_max / 2.0

    def problems(self) -> list[str]:
        out = super().problems()
        if self.eval_codes < 1:
            out.append(f"eval_codes must be >= 1 (got {self.eval_codes})")
        if self.eval_steps < 1:
            out.append(f"eval_steps must be >= 1 (got {self.eval_steps})")
        if self.eval_eps < 0:
            out.append(f"eval_eps must be >= 0 (got {self.eval_eps})")
        if self.eval_samples < 1:
            out.append(f"eval_samples must be >= 1 (got {self.eval_samples})")
        return out

    def train_config(self) -> TrainConfig:
        names = TrainConfig.field_names()
        return TrainConfig(**{n: getattr(self, n) for n in names})

    def fingerprint(self) -> str:
        return fingerprint(asdict(self))


def fingerprint(values: dict) -> str:
    blob = json.dumps(values, sort_keys=True, separators=(",", ":")).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


def _convert(kind, text: str):
    if kind is bool or kind == "bool":
        low = text.lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind is int or kind == "int":
        return int(text)
    if kind is float or kind == "float":
        return float(text)
    return text


def parse_config(text: str, overrides: dict | None = None,
                 required: tuple[str, ...] = REQUIRED_KEYS) -> ExperimentConfig:
    parser = configparser.ConfigParser(comment_prefixes=("#",), inline_comment_prefixes=("#",),
                                       delimiters=("=",), interpolation=None)
    parser.optionxform = str
    problems: list[str] = []
    try:
        parser.read_string("[experiment]\n" + text)
        values = dict(parser["experiment"])
    except configparser.Error as err:
        raise ConfigError([f"unreadable config: {err.message.splitlines()[0]}"]) from None
    values.update({k: str(v) for k, v in (overrides or {}).items()})

    types = {f.name: f.type for f in fields(ExperimentConfig)}
    kwargs = {}
    for key, raw in values.items():
        if key not in types:
            problems.append(f"{key}: unknown key")
            continue
        try:
            kwargs[key] = _convert(types[key], raw.strip())
        except ValueError:
            problems.append(f"{key}: cannot parse {raw.strip()!r} as {types[key]}")
    for key in required:
        if key not in values:
            problems.append(f"{key}: missing (required)")
    if problems:
        raise ConfigError(problems)
    cfg = ExperimentConfig(**kwargs)
    problems = cfg.problems()
    if problems:
        raise ConfigError(problems)
    return cfg


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError([f"cannot read config {path}: {err.strerror}"]) from None
    return parse_config(text, overrides)


def dump_config(cfg: ExperimentConfig) -> str:
    lines = []
    for key, value in asdict(cfg).items():
        if isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
