"""Experiment configuration: INI file sections merged with command-line overrides.

A config file has an optional ``[common]`` section and one section per
experiment id; later sources win (defaults < common < experiment < flags).
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Optional

EXPERIMENTS = (
    "h2-ground-ref",
    "h2-excited-ref",
    "h2-landscape",
    "bhz-ref",
    "bhz-bands",
    "sta-convergence",
)


class ConfigError(ValueError):
    pass


def parse_grid(text: str) -> list[float]:
    """``"a:b:step"`` (inclusive of b within rounding) or a comma list."""
    text = str(text).strip()
    if ":" in text:
        try:
            start, stop, step = (float(x) for x in text.split(":"))
        except ValueError:
            raise ConfigError(f"bad range {text!r}; expected start:stop:step") from None
        if step <= 0 or stop < start:
            raise ConfigError(f"bad range {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    try:
        values = [float(x) for x in text.replace(" ", "").split(",") if x]
    except ValueError:
        raise ConfigError(f"bad list {text!r}") from None
    if not values:
        raise ConfigError("empty grid")
    return values


def parse_int_grid(text: str) -> list[int]:
    values = parse_grid(text)
    if any(v != int(v) or v < 1 for v in values):
        raise ConfigError(f"step counts must be positive integers: {text!r}")
    return [int(v) for v in values]


def linecut_points(n: int) -> list[float]:
    """``n`` equally spaced values of kx*a on [-pi, pi); includes 0 for even n."""
    if n < 2:
        raise ConfigError("kx_points must be >= 2")
    return [float(-math.pi + 2 * math.pi * j / n) for j in range(n)]


def _bool(text: Any) -> bool:
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class ExperimentConfig:
    experiment: str = "h2-ground-ref"
    h2_table: Optional[str] = None
    bhz_params: Optional[str] = None
    out: str = "out"
    T: float = 1.0
    M_list: str = "1,2,3,4"
    R: float = 0.05
    R0: float = 0.05
    R_grid: str = "0.05:2.05:0.1"
    reference_M: int = 4
    kx0: float = 0.1
    kx_points: int = 128
    terms: str = ""
    threshold: float = 0.99
    sampling: str = "right"
    degeneracy_rtol: float = 1e-7
    noise: bool = False
    refine: bool = True
    repreparation: bool = True
    refine_simplex: float = 0.05
    refine_fatol: float = 1e-9
    refine_max_evals: int = 2000
    workers: int = 1
    seed: int = 0
    plots: bool = True

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        if not self.T > 0:
            raise ConfigError("T must be positive")
        if self.sampling not in ("right", "mid"):
            raise ConfigError("sampling must be 'right' or 'mid'")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.reference_M < 1:
            raise ConfigError("reference_M must be >= 1")
        for name in ("h2_table", "bhz_params"):
            path = getattr(self, name)
            if path and not Path(path).is_file():
                raise ConfigError(f"{name}: file not found: {path}")
        # validate the grids eagerly
        self.M_values
        self.R_values

    @property
    def M_values(self) -> list[int]:
        return parse_int_grid(self.M_list)

    @property
    def R_values(self) -> list[float]:
        return parse_grid(self.R_grid)

    @property
    def kx_values(self) -> list[float]:
        return linecut_points(self.kx_points)


_FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def coerce(name: str, value: Any) -> Any:
    kind = _FIELD_TYPES[name]
    if value is None:
        return None
    try:
        if kind == "float":
            return float(value)
        if kind == "int":
            return int(value)
        if kind == "bool":
            return _bool(value)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {value!r}") from None
    return str(value)


def experiment_defaults(experiment: str) -> dict[str, Any]:
    """Per-experiment defaults that differ from the dataclass defaults."""
    if experiment == "sta-convergence":
        return {"M_list": "1:60:1", "R": 1.55, "refine": False, "repreparation": False}
    if experiment == "h2-landscape":
        return {"M_list": "1"}
    if experiment == "bhz-ref":
        return {"M_list": "4"}
    return {}


def load_config(experiment: str, path: str | Path | None = None, overrides: dict | None = None) -> ExperimentConfig:
    values: dict[str, Any] = {"experiment": experiment}
    values.update(experiment_defaults(experiment))
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        parser = configparser.ConfigParser()
        parser.optionxform = str
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        for section in ("common", experiment):
            if parser.has_section(section):
                for key, raw in parser.items(section):
                    key = key.replace("-", "_")
                    if key not in _FIELD_TYPES or key == "experiment":
                        raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
                    values[key] = coerce(key, raw)
                    if key in ("h2_table", "bhz_params"):
                        values[key] = str((path.parent / raw).resolve()) if not Path(raw).is_absolute() else raw
    for key, raw in (overrides or {}).items():
        if raw is not None:
            values[key] = coerce(key, raw)
    return ExperimentConfig(**values)


def config_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    return dataclasses.asdict(cfg)

