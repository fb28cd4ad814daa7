"""
CLI Configuration - Recurrent Priming Codec

Resolves the run configuration in three layers: preset, JSON file, flags.
The JSON document has four optional sections:

    {
      "train":        {...TrainConfig fields...},
      "architecture": {...ArchitectureConfig fields...},
      "sabr":         {"target_quality": null, "target_rate": null},
      "eval":         {"variants": [...], "metrics": [...], "t_max": 16, ...}
    }

Unknown sections or keys are rejected. A flag that changes a value coming
from the preset or the file is logged, and so is the final configuration.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union
import copy
import json
import logging

from config.settings import Config, get_preset
from src.codec import ArchitectureConfig
from src.errors import ConfigError
from src.trainer import TrainConfig

logger = logging.getLogger(__name__)

SABR_DEFAULTS = {
    "target_quality": None,
    "target_rate": None,
}

EVAL_DEFAULTS = {
    "variants": list(Config.DEFAULT_VARIANTS),
    "metrics": list(Config.DEFAULT_METRICS),
    "t_max": 16,
    "threads": None,
    "ms_ssim_scales": Config.MS_SSIM_SCALES,
    "allow_untrained": False,
}

ARCHITECTURE_KEYS = {"encoder_depths", "decoder_depths", "binarizer_depth",
                     "max_iterations", "k_prime", "k_diffuse"}
SECTIONS = ("train", "architecture", "sabr", "eval")


@dataclass
class CliConfig:
    """Fully resolved configuration document."""
    train: Dict[str, Any] = field(default_factory=dict)
    architecture: Dict[str, Any] = field(default_factory=dict)
    sabr: Dict[str, Any] = field(default_factory=lambda: dict(SABR_DEFAULTS))
    eval: Dict[str, Any] = field(default_factory=lambda: dict(EVAL_DEFAULTS))

    def to_dict(self) -> Dict[str, Any]:
        return {name: dict(getattr(self, name)) for name in SECTIONS}

    def train_config(self) -> TrainConfig:
        return TrainConfig.from_dict(self.train)

    def architecture_config(self) -> ArchitectureConfig:
        return ArchitectureConfig.from_dict(self.architecture)

    def override(self, section: str, key: str, value: Any) -> None:
        """Set one value from a flag; ``None`` means the flag was not given."""
        if value is None:
            return
        _check_key(section, key)
        values = getattr(self, section)
        if key in values and values[key] != value:
            logger.info(f"Flag overrides {section}.{key}: {values[key]!r} -> {value!r}")
        values[key] = value

    def log_resolved(self) -> None:
        log_settings(self.to_dict())


def log_settings(settings: Dict[str, Any]) -> None:
    """Log the settings a command runs with, one JSON line."""
    logger.info(f"Resolved configuration: {json.dumps(settings, sort_keys=True, default=str)}")


def _allowed_keys(section: str) -> set:
    if section == "train":
        return set(TrainConfig.__dataclass_fields__)
    if section == "architecture":
        return ARCHITECTURE_KEYS
    if section == "sabr":
        return set(SABR_DEFAULTS)
    if section == "eval":
        return set(EVAL_DEFAULTS)
    raise ConfigError(f"unknown config section '{section}' (expected one of {', '.join(SECTIONS)})")


def _check_key(section: str, key: str) -> None:
    if key not in _allowed_keys(section):
        raise ConfigError(f"unknown key '{key}' in config section '{section}'")


def from_preset(name: Optional[str] = None) -> CliConfig:
    try:
        preset = get_preset(name)
    except KeyError as e:
        raise ConfigError(str(e.args[0])) from e
    return CliConfig(train=copy.deepcopy(preset.TRAIN),
                     architecture=copy.deepcopy(preset.ARCHITECTURE))


def merge_document(config: CliConfig, document: Dict[str, Any]) -> CliConfig:
    """Lay a parsed JSON document over ``config``, rejecting unknown sections and keys."""
    if not isinstance(document, dict):
        raise ConfigError("config document must be a JSON object")
    for section, values in document.items():
        _allowed_keys(section)
        if not isinstance(values, dict):
            raise ConfigError(f"config section '{section}' must be an object")
        for key, value in values.items():
            _check_key(section, key)
            getattr(config, section)[key] = value
    return config


def load_cli_config(path: Optional[Union[str, Path]] = None,
                    preset: Optional[str] = None) -> CliConfig:
    """Preset values with the JSON file (if any) laid over them."""
    config = from_preset(preset)
    if path is None:
        return config
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON ({e})") from e
    logger.info(f"Loaded config file {path}")
    return merge_document(config, document)
