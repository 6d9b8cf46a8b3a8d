"""
Config Management Module

Loads, validates and writes the YAML run configuration. A run config is a
two-level mapping: sections, each a flat mapping of keys. Unknown sections
or keys are rejected; omitted keys take the defaults below.
"""

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from ..logger import get_logger

logger = get_logger(__name__)


class ConfigError(ValueError):
    """Invalid run configuration"""


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise ConfigError(message)


@dataclass(frozen=True)
class RunSettings:
    seed: int = 7


@dataclass(frozen=True)
class CameraSettings:
    width: int = 64
    height: int = 64
    fov_deg: float = 60.0
    theta: float = 0.2
    sample_rate: float = 20000.0
    foreground: float = 0.8
    background: float = 0.2

    def __post_init__(self) -> None:
        _check(self.width > 0 and self.height > 0, "camera: width and height must be positive")
        _check(self.theta > 0, "camera.theta must be positive")
        _check(self.sample_rate > 0, "camera.sample_rate must be positive")
        _check(self.foreground > 0 and self.background > 0, "camera: intensities must be positive")


@dataclass(frozen=True)
class BinSettings:
    ranges: List[List[float]] = field(default_factory=lambda: [[1.0, 18.0], [18.0, 42.0], [42.0, 84.0], [84.0, 500.0]])
    programmed_max: float = 144.0

    def __post_init__(self) -> None:
        _check(all(len(r) == 2 for r in self.ranges), "bins.ranges must be [min, max] pairs")


@dataclass(frozen=True)
class BinningSettings:
    B: int = 5
    dt_us: int = 500

    def __post_init__(self) -> None:
        _check(self.B >= 1, "binning.B must be at least 1")
        _check(self.dt_us > 0, "binning.dt_us must be positive")


@dataclass(frozen=True)
class DatasetSettings:
    shapes: List[str] = field(default_factory=lambda: ["square", "circle", "diamond", "star"])
    shape_size: float = 0.025
    train_trajectories: List[str] = field(default_factory=lambda: ["circle", "lemniscate", "vertical-oval"])
    test_trajectories: List[str] = field(default_factory=lambda: ["test-1", "test-2"])
    orientations: List[float] = field(default_factory=lambda: [0.0, 45.0, 90.0, 145.0])
    senses: List[str] = field(default_factory=lambda: ["clockwise", "anticlockwise"])
    duration_s: float = 0.05
    noise_rate: float = 0.0
    trajectory_scale: float = 0.1
    depth: float = 0.3
    scale: float = 1.0
    val_fraction: float = 0.2
    workers: int = 1

    def __post_init__(self) -> None:
        _check(self.duration_s > 0, "dataset.duration_s must be positive")
        _check(self.noise_rate >= 0, "dataset.noise_rate must be non-negative")
        _check(0 < self.scale <= 1, "dataset.scale must be in (0, 1]")
        _check(0 <= self.val_fraction < 1, "dataset.val_fraction must be in [0, 1)")
        _check(self.workers >= 1, "dataset.workers must be at least 1")


@dataclass(frozen=True)
class OfsSettings:
    kernel: int = 5
    lr: float = 0.05
    momentum: float = 0.0
    epochs: int = 20
    batch_size: int = 16
    logistic_gain: float = 5.0
    surrogate: str = "triangle"
    surrogate_width: float = 1.0
    v_th_init: float = 1.0
    leak_init: float = 0.9
    pos_weight: float = 1.0
    windows_per_sequence: int = 0

    def __post_init__(self) -> None:
        _check(self.kernel % 2 == 1, "ofs.kernel must be odd")
        _check(self.lr > 0, "ofs.lr must be positive")
        _check(self.epochs >= 1 and self.batch_size >= 1, "ofs: epochs and batch_size must be at least 1")


@dataclass(frozen=True)
class OfpdSettings:
    conv1_channels: int = 8
    conv1_kernel: int = 5
    conv2_channels: int = 16
    conv2_kernel: int = 3
    hidden: int = 64
    lr: float = 0.01
    momentum: float = 0.9
    epochs: int = 30
    batch_size: int = 32
    beta: float = 1.0
    windows_per_sequence: int = 0

    def __post_init__(self) -> None:
        _check(self.lr > 0, "ofpd.lr must be positive")
        _check(self.epochs >= 1 and self.batch_size >= 1, "ofpd: epochs and batch_size must be at least 1")


@dataclass(frozen=True)
class InferenceSettings:
    min_support: int = 10
    close_kernel: int = 5
    workers: int = 4
    overlays: bool = False

    def __post_init__(self) -> None:
        _check(self.close_kernel % 2 == 1, "inference.close_kernel must be odd")
        _check(self.min_support >= 0, "inference.min_support must be non-negative")


@dataclass(frozen=True)
class EvaluationSettings:
    dts: List[int] = field(default_factory=lambda: [500, 1000, 5000])
    noise_rates: List[float] = field(default_factory=lambda: [0.0, 1000.0, 5000.0])


@dataclass(frozen=True)
class PathSettings:
    dataset_dir: str = "data/dataset"
    checkpoint_dir: str = "data/checkpoints"
    output_dir: str = "data/output"


@dataclass(frozen=True)
class LoggingSettings:
    level: str = "INFO"
    json: bool = True


@dataclass(frozen=True)
class RunConfig:
    """Resolved run configuration"""
    run: RunSettings = field(default_factory=RunSettings)
    camera: CameraSettings = field(default_factory=CameraSettings)
    bins: BinSettings = field(default_factory=BinSettings)
    binning: BinningSettings = field(default_factory=BinningSettings)
    dataset: DatasetSettings = field(default_factory=DatasetSettings)
    ofs: OfsSettings = field(default_factory=OfsSettings)
    ofpd: OfpdSettings = field(default_factory=OfpdSettings)
    inference: InferenceSettings = field(default_factory=InferenceSettings)
    evaluation: EvaluationSettings = field(default_factory=EvaluationSettings)
    paths: PathSettings = field(default_factory=PathSettings)
    logging: LoggingSettings = field(default_factory=LoggingSettings)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)

    def replace(self, section: str, **changes: Any) -> "RunConfig":
        """Copy with some keys of one section changed (CLI overrides)"""
        current = getattr(self, section)
        return dataclasses.replace(self, **{section: dataclasses.replace(current, **changes)})


def _coerce(section: str, key: str, value: Any, default: Any) -> Any:
    where = f"{section}.{key}"
    if isinstance(default, bool):
        _check(isinstance(value, bool), f"{where} must be a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        _check(isinstance(value, int) and not isinstance(value, bool), f"{where} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        _check(isinstance(value, (int, float)) and not isinstance(value, bool), f"{where} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, str):
        _check(isinstance(value, str), f"{where} must be a string, got {value!r}")
        return value
    if isinstance(default, list):
        _check(isinstance(value, list), f"{where} must be a list, got {value!r}")
        if default and isinstance(default[0], float):
            _check(all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value), f"{where} must hold numbers")
            return [float(v) for v in value]
        if default and isinstance(default[0], int):
            _check(all(isinstance(v, int) and not isinstance(v, bool) for v in value), f"{where} must hold integers")
        return list(value)
    return value


def build_run_config(raw: Optional[Dict[str, Any]]) -> RunConfig:
    """
    Validate a raw two-level mapping into a RunConfig.

    Raises:
        ConfigError: unknown section or key, wrong type or invalid value
    """
    raw = raw or {}
    _check(isinstance(raw, dict), "config root must be a mapping of sections")

    sections = {f.name: f for f in dataclasses.fields(RunConfig)}
    built: Dict[str, Any] = {}
    for name, values in raw.items():
        _check(name in sections, f"unknown config section {name!r}")
        values = values or {}
        _check(isinstance(values, dict), f"config section {name!r} must be a mapping")
        values = dict(values)

        section_defaults = sections[name].default_factory()  # type: ignore[misc]
        defaults = {f.name: getattr(section_defaults, f.name) for f in dataclasses.fields(section_defaults)}
        for key, value in values.items():
            _check(key in defaults, f"unknown config key {name}.{key}")
            values[key] = _coerce(name, key, value, defaults[key])
        built[name] = dataclasses.replace(section_defaults, **values)

    return RunConfig(**built)


class ConfigManager:
    """Manages configuration files"""

    def __init__(self, config_dir: Union[str, Path] = "./config"):
        self.config_dir: Path = Path(config_dir)
        self.configs: Dict[str, RunConfig] = {}
        logger.debug("ConfigManager initialized", config_dir=str(self.config_dir))

    def resolve(self, name_or_path: Union[str, Path]) -> Path:
        """A path as given, or <config_dir>/<name>.yaml for a bare name"""
        path = Path(name_or_path)
        if path.suffix in (".yaml", ".yml") or path.exists():
            return path
        return self.config_dir / f"{name_or_path}.yaml"

    def load_config(self, name_or_path: Union[str, Path]) -> RunConfig:
        """
        Load and validate a run configuration

        Raises:
            FileNotFoundError: the file does not exist
            ConfigError: the file is not valid YAML or fails validation
        """
        config_path = self.resolve(name_or_path)
        if not config_path.exists():
            logger.error("Config file not found", path=str(config_path))
            raise FileNotFoundError(f"Config file not found: {config_path}")

        try:
            with open(config_path, "r") as f:
                raw = yaml.safe_load(f)
        except yaml.YAMLError as e:
            logger.error("Failed to parse config", path=str(config_path), error=str(e))
            raise ConfigError(f"{config_path}: {e}") from e

        config = build_run_config(raw)
        self.configs[str(config_path)] = config
        logger.info("Loaded config", path=str(config_path))
        return config

    def get_config(self, name_or_path: Union[str, Path]) -> Optional[RunConfig]:
        """Get a previously loaded configuration"""
        return self.configs.get(str(self.resolve(name_or_path)))

    @staticmethod
    def save_config(config: RunConfig, path: Union[str, Path]) -> Path:
        """Write the resolved configuration as YAML (stored next to command outputs)"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            yaml.safe_dump(config.to_dict(), f, sort_keys=True, default_flow_style=None)
        return path


__all__ = [
    "BinSettings",
    "BinningSettings",
    "CameraSettings",
    "ConfigError",
    "ConfigManager",
    "DatasetSettings",
    "EvaluationSettings",
    "InferenceSettings",
    "LoggingSettings",
    "OfpdSettings",
    "OfsSettings",
    "PathSettings",
    "RunConfig",
    "RunSettings",
    "build_run_config",
]
