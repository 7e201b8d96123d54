"""
INI style configuration shared by all command line tools. Every section maps onto
one pydantic model:

[camera]   -> CameraConfig
[dataset]  -> DatasetConfig
[sampling] -> SamplingConfig
[train]    -> TrainConfig (sampling taken from [sampling])
[gaptv]    -> GapTvConfig
"""
import configparser
import logging
from pathlib import Path
from typing import Any, Optional, Union

from pydantic import Field, ValidationError

from sci_radiance.exceptions import ConfigurationError
from sci_radiance.model import (
    CameraConfig,
    DatasetConfig,
    GapTvConfig,
    Model,
    SamplingConfig,
    TrainConfig,
)

logger = logging.getLogger(__name__)

SECTIONS: dict[str, type[Model]] = {
    "camera": CameraConfig,
    "dataset": DatasetConfig,
    "sampling": SamplingConfig,
    "train": TrainConfig,
    "gaptv": GapTvConfig,
}


class AppConfig(Model):
    """All settings of a pipeline run"""

    camera: CameraConfig = Field(default_factory=CameraConfig)
    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    sampling: SamplingConfig = Field(default_factory=SamplingConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    gaptv: GapTvConfig = Field(default_factory=GapTvConfig)


def convert_value(value: str) -> Union[str, bool, list[str]]:
    """Booleans from true/false, lists from comma separated values"""
    value = value.strip()
    if value.lower() == "false":
        return False
    if value.lower() == "true":
        return True
    if "," in value:
        return [v.strip() for v in value.split(",")]
    return value


def convert_overrides(raw_overrides: tuple[str, ...]) -> dict[str, dict[str, Any]]:
    """
    Convert section.key=value pairs into nested section dictionaries.

    :raises ConfigurationError: If an entry is not a section.key=value pair or names
        an unknown section
    """
    converted: dict[str, dict[str, Any]] = {}
    for override in raw_overrides:
        if "=" not in override:
            raise ConfigurationError(
                f"Overrides need to contain =. {override} does not fulfill that "
                "requirement"
            )
        split_override = override.split("=")
        if len(split_override) != 2:
            raise ConfigurationError(
                f"Overrides need to be a value pair. {override} does not fulfill "
                "that requirement"
            )
        path, value = split_override
        if "." not in path:
            raise ConfigurationError(f"Override key {path} must be section.key")
        section, key = path.strip().split(".", 1)
        if section not in SECTIONS:
            raise ConfigurationError(f"Unknown config section {section}")
        converted.setdefault(section, {})[key] = convert_value(value)
    return converted


def _build(values: dict[str, dict[str, Any]]) -> AppConfig:
    if "sampling" in values.get("train", {}):
        raise ConfigurationError(
            "Sampling of [train] is set in the [sampling] section"
        )
    try:
        sections: dict[str, Model] = {}
        for name, model in SECTIONS.items():
            if name == "train":
                continue
            sections[name] = model(**values.get(name, {}))
        sections["train"] = TrainConfig(
            **values.get("train", {}), sampling=sections["sampling"]
        )
        return AppConfig(**sections)
    except ValidationError as e:
        raise ConfigurationError(str(e)) from e


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: tuple[str, ...] = (),
) -> AppConfig:
    """
    Read a config file and apply section.key=value overrides. Missing sections and
    keys fall back to the model defaults.

    :param path: INI file. Defaults only if None
    :param overrides: Raw override strings

    :raises ConfigurationError: On unreadable files, unknown sections or keys and
        invalid values
    :return: Validated AppConfig
    """
    values: dict[str, dict[str, Any]] = {}
    if path is not None:
        parser = configparser.ConfigParser()
        try:
            with open(path, "r") as f:
                parser.read_file(f)
        except configparser.Error as e:
            raise ConfigurationError(f"Could not parse {path}: {e}") from e
        except OSError as e:
            raise ConfigurationError(f"Could not read {path}: {e}") from e
        for section in parser.sections():
            if section not in SECTIONS:
                raise ConfigurationError(f"Unknown config section {section}")
            values[section] = {
                key: convert_value(value) for key, value in parser[section].items()
            }
        logger.debug("Loaded config sections %s from %s", parser.sections(), path)

    for section, entries in convert_overrides(overrides).items():
        values.setdefault(section, {}).update(entries)
    return _build(values)


def _format_value(value: Any) -> str:
    if isinstance(value, (tuple, list)):
        return ", ".join(str(v) for v in value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_config(path: Union[str, Path], config: AppConfig) -> None:
    parser = configparser.ConfigParser()
    for name in SECTIONS:
        section = getattr(config, name).model_dump(exclude={"sampling"})
        parser[name] = {key: _format_value(value) for key, value in section.items()}
    with open(path, "w") as f:
        parser.write(f)
