"""
Configuration and Constants for the Smith Predictor simulation
"""
import configparser
import hashlib
import os
from typing import List, Optional

import numpy as np
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from controller import ControllerConfig
from errors import ConfigError
from krlst import KernelParams
from plant import PlantParams
from predictor import PredictorConfig

# ========== PATHS ==========
REPO_DIR = os.path.dirname(os.path.abspath(__file__))
DEFAULT_CONFIG_PATH = os.path.join(REPO_DIR, "default_config.ini")
LOG_DIR = "logs"

# ========== OUTPUT SETTINGS ==========
CSV_FLOAT_FORMAT = "%.17g"  # full double precision, byte-stable
SUMMARY_FILE = "summaries.csv"
EXCLUSION_FILE = "exclusions.csv"
REPORT_FILE = "report.txt"
TRACES_FILE = "error_traces.csv"

# ========== LOAD ENVIRONMENT VARIABLES ==========
load_dotenv(os.path.join(REPO_DIR, ".env"))
WORKERS = int(os.environ.get("SMITH_WORKERS", "1"))
RESULTS_DIR = os.environ.get("SMITH_RESULTS_DIR", "results")
LOG_LEVEL = os.environ.get("SMITH_LOG_LEVEL", "INFO")

SECTIONS = ("protocol", "plant", "controller", "krlst", "predictor", "harness")


# ========== TYPED SECTIONS ==========

class ProtocolConfig(BaseModel):
    """Circular tracking protocol ([protocol] section)"""
    model_config = ConfigDict(frozen=True)

    duration: float = Field(default=60.0, gt=0)
    buildup: float = Field(default=20.0, gt=0)
    omega: float = Field(default=0.5, gt=0)
    radius: float = Field(default=0.05, gt=0)
    transient_end: float = Field(default=22.3, gt=0)
    dt: float = Field(default=0.02, gt=0)
    z_ref: float = 0.0
    center: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    orientation_ref: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0])

    @model_validator(mode="after")
    def _phases(self):
        if not self.transient_end < self.duration:
            raise ValueError("transient_end must be earlier than duration")
        if len(self.center) != 2 or len(self.orientation_ref) != 3:
            raise ValueError("center needs 2 entries and orientation_ref 3")
        return self

    @property
    def n_ticks(self) -> int:
        return int(round(self.duration / self.dt))

    @property
    def transient_ticks(self) -> int:
        return int(round(self.transient_end / self.dt))


class HarnessConfig(BaseModel):
    """Calibration, exclusion and tuning settings ([harness] section)"""
    model_config = ConfigDict(frozen=True)

    calibration_seed: int = 1000
    calibration_gain: str = "med"
    exclusion_factor: float = Field(default=5.0, gt=1)
    tune_sigma2: List[float] = Field(default_factory=lambda: [1.0, 10.0, 100.0])
    tune_noise_var: List[float] = Field(default_factory=lambda: [1e-4, 1e-3, 1e-2])
    tune_lambda: List[float] = Field(default_factory=lambda: [0.99, 0.999, 1.0])
    tune_refine: List[float] = Field(default_factory=lambda: [0.5, 0.8, 1.2, 1.5])
    tune_online_duration: float = Field(default=30.0, gt=0)
    tune_seeds: int = Field(default=2, ge=1)

    @field_validator("tune_sigma2", "tune_noise_var", "tune_lambda", "tune_refine", mode="before")
    @classmethod
    def _listify(cls, value):
        if isinstance(value, (str, float, int)):
            return [value]
        return value


class ExperimentConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    protocol: ProtocolConfig
    plant: PlantParams
    controller: ControllerConfig
    krlst: KernelParams
    predictor: PredictorConfig
    harness: HarnessConfig

    @model_validator(mode="after")
    def _shared_rate(self):
        if abs(self.plant.dt - self.protocol.dt) > 1e-12:
            raise ValueError("plant dt and protocol dt must match")
        return self


# ========== INI SERIALIZATION ==========

def _parse_value(text: str):
    text = text.strip()
    if ";" in text:
        return [[float(v) for v in row.split(",") if v.strip()] for row in text.split(";") if row.strip()]
    if "," in text:
        return [float(v) for v in text.split(",") if v.strip()]
    return text


def _format_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _format_value(value) -> str:
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        if value and isinstance(value[0], (list, tuple)):
            return "; ".join(", ".join(repr(float(v)) for v in row) for row in value)
        return ", ".join(_format_scalar(v) for v in value)
    return _format_scalar(value)


def config_from_dict(sections: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(sections)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {e}") from e


def load_config(path: Optional[str] = None) -> ExperimentConfig:
    """Read an INI config file (sections as in default_config.ini)"""
    path = path or DEFAULT_CONFIG_PATH
    parser = configparser.ConfigParser()
    if not parser.read(path, encoding="utf-8"):
        raise ConfigError(f"config file not found: {path}")
    missing = [s for s in SECTIONS if not parser.has_section(s)]
    if missing:
        raise ConfigError(f"config {path} lacks sections: {', '.join(missing)}")
    sections = {
        name: {key: _parse_value(raw) for key, raw in parser.items(name)}
        for name in SECTIONS
    }
    return config_from_dict(sections)


def canonical_text(config: ExperimentConfig) -> str:
    """Stable serialization: sorted sections and keys, repr floats"""
    lines = []
    for name in sorted(SECTIONS):
        section = getattr(config, name).model_dump(by_alias=True, exclude_none=True)
        lines.append(f"[{name}]")
        for key in sorted(section):
            lines.append(f"{key} = {_format_value(section[key])}")
        lines.append("")
    return "\n".join(lines)


def config_hash(config: ExperimentConfig) -> str:
    return hashlib.sha256(canonical_text(config).encode("utf-8")).hexdigest()


def save_config(config: ExperimentConfig, path: str):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(canonical_text(config))


def with_changes(config: ExperimentConfig, **sections) -> ExperimentConfig:
    """
    Validated copy with per-section field overrides

    Example: with_changes(cfg, plant={"delay_steps": 0}, krlst={"lambda": 1.0})
    """
    values = {name: getattr(config, name).model_dump(by_alias=True) for name in SECTIONS}
    for name, changes in sections.items():
        if name not in values:
            raise ConfigError(f"unknown config section: {name}")
        values[name].update(changes)
    return config_from_dict(values)
