"""Experiment configuration stored as a flat ``[experiment]`` INI section."""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .regressors import DEFAULT_CS, DEFAULT_KS

SECTION = "experiment"
METHODS = ("gp", "fbkr", "stbkr")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    input: str = ""
    output_dir: str = "out"
    w_down: float = 1.0
    w_up: float = 1.0
    metric: str = "planar"
    smooth_k: int = 5
    smooth_speeds: bool = True
    split_ratio: float = 0.8
    split_seed: int = 0
    grid_rows: int = 15
    grid_cols: int = 15
    cv_folds: int = 5
    cv_seed: int = 0
    candidate_cs: tuple[float, ...] = DEFAULT_CS
    candidate_ks: tuple[int, ...] = DEFAULT_KS
    gp_fraction: float = 0.1
    gp_full: bool = False
    gp_restarts: int = 4
    gp_seed: int = 0
    gp_max_iter: int = 400
    methods: tuple[str, ...] = METHODS
    classify: bool = True

    def validate(self) -> "ExperimentConfig":
        problems = []
        if not self.input:
            problems.append("input is required")
        if self.w_down < 0 or self.w_up < 0 or self.w_down + self.w_up <= 0:
            problems.append("w_down/w_up must be >= 0 with a positive sum")
        if self.metric not in ("planar", "equirect"):
            problems.append("metric must be planar or equirect")
        if self.smooth_k < 1:
            problems.append("smooth_k must be >= 1")
        if not 0 < self.split_ratio < 1:
            problems.append("split_ratio must be in (0, 1)")
        if self.grid_rows < 1 or self.grid_cols < 1:
            problems.append("grid_rows/grid_cols must be >= 1")
        if self.cv_folds < 2:
            problems.append("cv_folds must be >= 2")
        if not self.candidate_cs or any(c <= 0 for c in self.candidate_cs):
            problems.append("candidate_cs must be non-empty and positive")
        if not self.candidate_ks or any(k < 1 for k in self.candidate_ks):
            problems.append("candidate_ks must be non-empty and >= 1")
        if not 0 < self.gp_fraction <= 1:
            problems.append("gp_fraction must be in (0, 1]")
        if self.gp_restarts < 1:
            problems.append("gp_restarts must be >= 1")
        if not self.methods or any(m not in METHODS for m in self.methods):
            problems.append(f"methods must be a non-empty subset of {','.join(METHODS)}")
        if problems:
            raise ConfigError("; ".join(problems))
        return self


def _convert(f: dataclasses.Field, raw: str):
    kind = f.type if isinstance(f.type, str) else str(f.type)
    raw = raw.strip()
    try:
        if kind == "bool":
            lowered = raw.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind.startswith("tuple[float"):
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind.startswith("tuple[int"):
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind.startswith("tuple[str"):
            return tuple(v.strip() for v in raw.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"bad value for {f.name}: {raw!r}") from None
    return raw


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def from_mapping(values: dict, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = dataclasses.replace(base) if base is not None else ExperimentConfig()
    for key, raw in values.items():
        if raw is None:
            continue
        if key not in FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        setattr(cfg, key, _convert(FIELDS[key], raw) if isinstance(raw, str) else raw)
    return cfg


def load(path) -> ExperimentConfig:
    """Read a config file; relative ``input``/``output_dir`` resolve against its folder."""
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    if not parser.has_section(SECTION):
        raise ConfigError(f"{path}: missing [{SECTION}] section")
    cfg = from_mapping(dict(parser.items(SECTION)))
    for key in ("input", "output_dir"):
        value = getattr(cfg, key)
        if value and not Path(value).is_absolute():
            setattr(cfg, key, str(path.parent / value))
    return cfg


def dumps(cfg: ExperimentConfig) -> str:
    lines = [f"[{SECTION}]"]
    for f in fields(cfg):
        lines.append(f"{f.name} = {_format(getattr(cfg, f.name))}")
    return "\n".join(lines) + "\n"


def save(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(dumps(cfg), encoding="utf-8")
