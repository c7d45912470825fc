import sys
from typing import Any, Literal, Mapping, Optional

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self
from enum import Enum
import hashlib
import json
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt
from pydantic_settings import BaseSettings, SettingsConfigDict

from .compress import DEFAULT_DELTA, CompressionMode
from .errors import ConfigError
from .fusion import DEFAULT_ENUMERATION_CAP
from .partition import PartitionStrategy

ExperimentId = Literal["exp1", "exp2", "exp3", "exp4", "exp5", "exp6"]
LogLevel = Literal["DEBUG", "INFO", "WARNING", "ERROR"]
Counts = PositiveInt | list[PositiveInt]
OptionValue = int | float | str | bool | list[int] | list[float] | list[str]


class Scale(str, Enum):
    DESK = "desk"
    PAPER = "paper"


class Settings(BaseSettings):
    """Runtime configuration shared by every command."""

    workers: int = Field(
        4,
        description="Number of Monte Carlo runs executed concurrently",
        ge=1,
        le=64,
    )
    log_level: LogLevel = Field("WARNING", description="Level of the cmc loggers")
    output_dir: Path = Field(Path("results"), description="Directory receiving result tables")
    scale: Scale = Field(Scale.DESK, description="Default experiment scale")
    kde_delta: float = Field(
        DEFAULT_DELTA, description="Kernel regularization added to every covariance", gt=0
    )
    enumeration_cap: int = Field(
        DEFAULT_ENUMERATION_CAP,
        description="Largest product mixture the central node may enumerate",
        ge=1,
    )

    def __init__(self, env_file: Optional[str] = None):
        if env_file is not None:
            super().__init__(_env_file=env_file)
        else:
            super().__init__()

    model_config = SettingsConfigDict(
        env_prefix="CMC_",
        env_file=".env",
    )


class ExperimentConfig(BaseModel):
    """One experiment run; unset fields are filled from the scale defaults."""

    model_config = ConfigDict(extra="forbid", validate_by_name=True, validate_by_alias=True)

    experiment: ExperimentId
    seed: int = Field(0, ge=0, lt=2**64)
    scale: Scale = Scale.DESK
    n: Optional[Counts] = None
    m: Optional[Counts] = None
    t: Optional[PositiveInt] = None
    runs: Optional[PositiveInt] = None
    nodes: Optional[Counts] = Field(None, alias="l")
    k: Optional[Counts] = None
    partition_strategy: Optional[PartitionStrategy] = None
    compression_mode: Optional[CompressionMode] = None
    delta: Optional[PositiveFloat] = None
    prior_std: Optional[PositiveFloat] = None
    options: dict[str, OptionValue] = {}

    @classmethod
    def load(
        cls,
        experiment: str,
        path: Optional[str | Path] = None,
        *,
        seed: Optional[int] = None,
        scale: Optional[Scale] = None,
        default_scale: Scale = Scale.DESK,
    ) -> Self:
        """Read a JSON config file (optional) and apply command-line overrides."""
        data: dict[str, Any] = {"scale": default_scale}
        if path is not None:
            try:
                loaded = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigError(f"cannot read config file {path}: {e}") from e
            if not isinstance(loaded, dict):
                raise ConfigError(f"config file {path} must hold a JSON object")
            data.update(loaded)
        if data.setdefault("experiment", experiment) != experiment:
            raise ConfigError(
                f"config file is for {data['experiment']}, but {experiment} was requested"
            )
        if seed is not None:
            data["seed"] = seed
        if scale is not None:
            data["scale"] = scale
        return cls.model_validate(data)

    def resolved(self, defaults: Mapping[str, Any]) -> Self:
        """Copy with every unset field taken from ``defaults``; options are merged."""
        data = self.model_dump(by_alias=True)
        for key, value in defaults.items():
            if key == "options":
                data["options"] = {**value, **self.options}
            elif data.get(key) is None:
                data[key] = value
        return type(self).model_validate(data)

    def count(self, name: str) -> int:
        value = getattr(self, name)
        if value is None:
            raise ConfigError(f"{self.experiment}: '{name}' is not set")
        if isinstance(value, list):
            if len(value) != 1:
                raise ConfigError(f"{self.experiment}: '{name}' takes a single value")
            return value[0]
        return value

    def counts(self, name: str) -> list[int]:
        value = getattr(self, name)
        if value is None:
            raise ConfigError(f"{self.experiment}: '{name}' is not set")
        if isinstance(value, list):
            if not value:
                raise ConfigError(f"{self.experiment}: '{name}' is empty")
            return list(value)
        return [value]

    def option(self, name: str, default: Any = None) -> Any:
        return self.options.get(name, default)

    @property
    def config_hash(self) -> str:
        payload = self.model_dump_json(by_alias=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]
