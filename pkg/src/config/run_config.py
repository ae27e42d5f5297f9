"""
Run configuration: an INI file validated by pydantic models.

Sections: [dataset], [model], [train], [eval], [ablate], [inspect], [output].
Relative paths are resolved against the directory of the config file. See
docs/CONFIG.md for every key.
"""
import configparser
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Sequence, Tuple, Union

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.config.settings import Settings
from src.errors import ConfigError
from src.extractors.interaction_reader import FormatDescriptor
from src.recommender.config import DROPOUT_SITES, ModelConfig, Variant, parse_variant
from src.training.config import TrainConfig


SECTIONS = ('dataset', 'model', 'train', 'eval', 'ablate', 'inspect', 'output')

DELIMITER_NAMES = {'tab': '\t', 'comma': ',', 'semicolon': ';', 'space': ' ', 'pipe': '|'}


def _split_list(value):
    if isinstance(value, str):
        return [part.strip() for part in value.split(',') if part.strip()]
    return value


# Comma-separated INI values
StrList = Annotated[Tuple[str, ...], BeforeValidator(_split_list)]
IntList = Annotated[Tuple[int, ...], BeforeValidator(_split_list)]
Ratios = Annotated[Tuple[float, float, float], BeforeValidator(_split_list)]


class DatasetConfig(BaseModel):
    """[dataset]: raw log layout, sessionization, windowing and splitting."""
    model_config = ConfigDict(extra='forbid')

    path: Optional[Path] = None
    preset: Optional[str] = None
    delimiter: str = ','
    columns: StrList = ('user', 'item', 'timestamp')
    has_header: bool = False
    timestamp_format: Optional[str] = None
    encoding: str = 'utf-8'
    threshold_seconds: Union[Literal['auto'], int] = 7200
    threshold_coverage: float = Field(0.8, gt=0.0, le=1.0)
    sessions_per_instance: int = Field(5, ge=1)
    max_delta: int = Field(128, ge=1)
    split_ratios: Ratios = (0.7, 0.1, 0.2)
    seed: int = 0

    @field_validator('delimiter', mode='before')
    @classmethod
    def _named_delimiter(cls, value):
        return DELIMITER_NAMES.get(str(value).lower(), value)

    @field_validator('threshold_seconds', mode='before')
    @classmethod
    def _check_threshold(cls, value):
        if isinstance(value, str) and value.strip().lower() == 'auto':
            return 'auto'
        value = int(value)
        if value <= 0:
            raise ValueError(f"threshold_seconds must be positive or 'auto', got {value}")
        return value

    @field_validator('split_ratios')
    @classmethod
    def _check_ratios(cls, value):
        if any(r < 0 for r in value) or abs(sum(value) - 1.0) > 1e-9:
            raise ValueError(f"split_ratios must be non-negative and sum to 1, got {value}")
        return value

    def format_descriptor(self) -> FormatDescriptor:
        try:
            return FormatDescriptor(self.delimiter, tuple(self.columns), self.has_header,
                                    self.timestamp_format, self.encoding)
        except ValueError as e:
            raise ConfigError(str(e)) from e


class ModelSettings(BaseModel):
    """[model]: architecture knobs; T, m and C come from the instance file."""
    model_config = ConfigDict(extra='forbid')

    d: int = Field(64, ge=1)
    h: int = Field(8, ge=1)
    block_count: int = Field(1, ge=1)
    dropout_rate: float = Field(0.5, ge=0.0, lt=1.0)
    variant: Variant = Variant.FULL
    layer_norm_eps: float = Field(1e-5, gt=0.0)
    dropout_sites: StrList = DROPOUT_SITES

    @field_validator('variant', mode='before')
    @classmethod
    def _resolve_variant(cls, value):
        return parse_variant(value)

    @model_validator(mode='after')
    def _check_heads(self):
        if self.d % self.h != 0:
            raise ValueError(f"d={self.d} must be divisible by h={self.h}")
        return self

    def to_model_config(self, T: int, m: int, C: int, variant: Optional[Variant] = None) -> ModelConfig:
        """Complete the settings with the data-dependent shape."""
        data = self.model_dump()
        if variant is not None:
            data['variant'] = variant
        return ModelConfig(T=T, m=m, C=C, **data)


class EvalConfig(BaseModel):
    """[eval]: cut-offs and ranking options."""
    model_config = ConfigDict(extra='forbid')

    ks: IntList = (20, 30)
    portion: Literal['train', 'validation', 'test'] = 'test'
    exclude_history: bool = False
    workers: int = Field(1, ge=1)

    @field_validator('ks')
    @classmethod
    def _check_ks(cls, value):
        if not value or min(value) < 1:
            raise ValueError(f"ks must be positive integers, got {value}")
        return value


class AblateConfig(BaseModel):
    """[ablate]: variants to compare and how many seeded runs to average."""
    model_config = ConfigDict(extra='forbid')

    variants: Tuple[Variant, ...] = tuple(Variant)
    repeats: int = Field(1, ge=1)

    @field_validator('variants', mode='before')
    @classmethod
    def _resolve_variants(cls, value):
        return tuple(variant_list(value))


class InspectConfig(BaseModel):
    """[inspect]: which instance to export and the lag range to sweep."""
    model_config = ConfigDict(extra='forbid')

    portion: Literal['train', 'validation', 'test'] = 'test'
    user: Optional[str] = None
    index: int = Field(0, ge=0)
    delta_min: int = Field(1, ge=1)
    delta_max: Optional[int] = None


class OutputConfig(BaseModel):
    """[output]: run directory and log level."""
    model_config = ConfigDict(extra='forbid')

    dir: Path = Field(default_factory=lambda: Settings.DEFAULT_OUTPUT_DIR)
    log_level: str = Field(default_factory=lambda: Settings.LOG_LEVEL)


class RunConfig(BaseModel):
    """The whole configuration driving every command."""
    model_config = ConfigDict(extra='forbid')

    dataset: DatasetConfig = Field(default_factory=DatasetConfig)
    model: ModelSettings = Field(default_factory=ModelSettings)
    train: TrainConfig = Field(default_factory=TrainConfig)
    eval: EvalConfig = Field(default_factory=EvalConfig)
    ablate: AblateConfig = Field(default_factory=AblateConfig)
    inspect: InspectConfig = Field(default_factory=InspectConfig)
    output: OutputConfig = Field(default_factory=OutputConfig)

    @property
    def output_dir(self) -> Path:
        return self.output.dir

    def to_ini(self) -> str:
        """Effective configuration as INI text (sections and keys sorted)."""
        parser = configparser.ConfigParser(interpolation=None)
        for section in SECTIONS:
            values = getattr(self, section).model_dump(mode='json')
            parser[section] = {key: _ini_value(values[key]) for key in sorted(values) if values[key] is not None}
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {value}" for key, value in parser[section].items())
            lines.append('')
        return '\n'.join(lines)


def _ini_value(value) -> str:
    if isinstance(value, (list, tuple)):
        return ', '.join(_ini_value(v) for v in value)
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if value == '\t':
        return 'tab'
    return str(value)


def parse_overrides(overrides: Sequence[str]) -> Dict[str, Dict[str, str]]:
    """
    Turn ``section.key=value`` strings into nested dictionaries.

    Raises:
        ConfigError: On a malformed override or an unknown section
    """
    result: Dict[str, Dict[str, str]] = {}
    for override in overrides or ():
        name, sep, value = override.partition('=')
        section, dot, key = name.strip().partition('.')
        if not sep or not dot or not key:
            raise ConfigError(f"override {override!r} must look like section.key=value")
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r}; valid sections: {', '.join(SECTIONS)}")
        result.setdefault(section, {})[key.strip()] = value.strip()
    return result


def _apply_preset(sections: Dict[str, Dict[str, str]]):
    """Fill keys the file leaves unset from the named dataset preset."""
    name = sections.get('dataset', {}).get('preset')
    if not name:
        return
    presets = Settings.get_dataset_presets()
    if name not in presets:
        raise ConfigError(f"unknown dataset preset {name!r}; valid presets: {', '.join(sorted(presets))}")
    for section, values in presets[name].items():
        target = sections.setdefault(section, {})
        for key, value in values.items():
            target.setdefault(key, str(value))


def _resolve(path: Optional[Path], base: Path) -> Optional[Path]:
    if path is None:
        return None
    path = Path(path).expanduser()
    return path if path.is_absolute() else (base / path)


def build_run_config(sections: Dict[str, Dict[str, str]], base_dir: Path = None) -> RunConfig:
    """
    Validate raw section dictionaries into a RunConfig.

    Raises:
        ConfigError: On unknown sections or keys and on invalid values
    """
    unknown = set(sections) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections {sorted(unknown)}; valid sections: {', '.join(SECTIONS)}")
    sections = {name: dict(values) for name, values in sections.items()}
    _apply_preset(sections)

    try:
        config = RunConfig(**sections)
    except ValidationError as e:
        problems = '; '.join(f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors())
        raise ConfigError(f"invalid configuration: {problems}") from None

    base_dir = Path(base_dir) if base_dir else Path.cwd()
    config.dataset.path = _resolve(config.dataset.path, base_dir)
    config.output.dir = _resolve(config.output.dir, base_dir)
    return config


def load_run_config(filepath: Optional[Union[str, Path]] = None, overrides: Sequence[str] = ()) -> RunConfig:
    """
    Read an INI run configuration and apply ``section.key=value`` overrides.

    Args:
        filepath: INI file; None uses defaults only
        overrides: Values taking precedence over the file

    Returns:
        Validated RunConfig

    Raises:
        ConfigError: If the file is missing or unparsable, or validation fails
    """
    sections: Dict[str, Dict[str, str]] = {}
    base_dir = Path.cwd()

    if filepath is not None:
        filepath = Path(filepath)
        if not filepath.is_file():
            raise ConfigError(f"config file not found: {filepath}")
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read(filepath, encoding='utf-8')
        except configparser.Error as e:
            raise ConfigError(f"cannot parse {filepath}: {e}") from e
        sections = {name: dict(parser[name]) for name in parser.sections()}
        base_dir = filepath.resolve().parent

    for section, values in parse_overrides(overrides).items():
        sections.setdefault(section, {}).update(values)

    return build_run_config(sections, base_dir)


def variant_list(values: Union[str, Sequence[str]]) -> List[Variant]:
    """Parse a comma-separated string or a sequence of variant names."""
    return [parse_variant(v) for v in _split_list(values)]
