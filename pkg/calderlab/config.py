"""Experiment configuration: key=value files, CLI overrides and validation."""
import logging
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

logger = logging.getLogger(__name__)

EXPERIMENTS = (
    'symbol_check',
    'coeff_decay',
    'scale_uniformity',
    'operator_compare',
    'duality_check',
    'model_growth',
    'shifted_norms',
    'cz_audit',
    'symbol_eval',
    'heatmap',
)
KINDS = ('c1', 'c1plus', 'gen22', 'circular')
PARTS = ('low-high', 'high-low', 'high-high')
FORMATS = ('csv', 'json')
LOG_LEVELS = ('DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL')

# experiments that walk the dyadic tree need L to be a power of two
DYADIC_EXPERIMENTS = ('shifted_norms', 'cz_audit', 'model_growth')
COEFF_EXPERIMENTS = ('coeff_decay', 'scale_uniformity')


class ConfigError(ValueError):
    """Invalid configuration value; carries the offending field name."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"Invalid value for {field_name}: {message}")
        self.field = field_name


@dataclass
class ExperimentConfig:
    experiment: str = "symbol_check"
    L: float = 16.0
    N: int = 4096
    kind: str = "c1"
    a: float = 1.0
    b: float = 1.0
    part: str = "low-high"
    k: int = 0
    nmax: int = 64
    resolution: int = 4096
    epsilon: float = 0.0  # 0 selects the grid spacing
    p: float = 2.0
    shifts: List[int] = None
    trials: int = 200
    seed: int = 20240101
    points: int = 10000
    nodes: int = 1000000
    xi: float = 0.0
    xi1: float = 0.0
    xi2: float = 0.0
    out: str = "results"
    format: List[str] = None
    log_level: str = "INFO"
    log_file_path: str = "logs/calderlab.log"
    max_log_file_size: int = 10 * 1024 * 1024  # 10MB
    database_path: str = "calderlab_runs.db"

    def __post_init__(self):
        if self.shifts is None:
            self.shifts = [1, 4, 16, 64, 256]
        if self.format is None:
            self.format = ['csv', 'json']

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


FIELD_TYPES = {
    'experiment': str,
    'L': float,
    'N': int,
    'kind': str,
    'a': float,
    'b': float,
    'part': str,
    'k': int,
    'nmax': int,
    'resolution': int,
    'epsilon': float,
    'p': float,
    'shifts': List[int],
    'trials': int,
    'seed': int,
    'points': int,
    'nodes': int,
    'xi': float,
    'xi1': float,
    'xi2': float,
    'out': str,
    'format': List[str],
    'log_level': str,
    'log_file_path': str,
    'max_log_file_size': int,
    'database_path': str,
}


def convert_value(field_name: str, raw: str) -> Any:
    expected = FIELD_TYPES[field_name]
    text = raw.strip()
    try:
        if expected is int:
            return int(text)
        if expected is float:
            return float(text)
        if expected == List[int]:
            return [int(item) for item in text.split(',') if item.strip()]
        if expected == List[str]:
            return [item.strip() for item in text.split(',') if item.strip()]
    except ValueError:
        raise ConfigError(field_name, f"cannot parse {text!r}")
    return text


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse flat key=value lines; '#' starts a comment, blank lines are skipped."""
    values: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.split('#', 1)[0].strip()
        if not stripped:
            continue
        if '=' not in stripped:
            raise ConfigError(f"line {number}", f"expected key=value, got {stripped!r}")
        key, raw = stripped.split('=', 1)
        key = key.strip()
        if key not in FIELD_TYPES:
            raise ConfigError(key, "unknown key")
        values[key] = convert_value(key, raw)
    return ExperimentConfig(**values)


def _format_value(value: Any) -> str:
    if isinstance(value, list):
        return ','.join(str(item) for item in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def serialize_config(config: ExperimentConfig) -> str:
    return ''.join(f"{f.name}={_format_value(getattr(config, f.name))}\n" for f in fields(config))


def _is_power_of_two(value: int) -> bool:
    return value > 0 and (value & (value - 1)) == 0


def validate_config(config: ExperimentConfig) -> ExperimentConfig:
    """Check types and the preconditions of the experiment the config invokes."""
    for field_name, expected in FIELD_TYPES.items():
        value = getattr(config, field_name)
        if expected is float:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(field_name, f"expected float, got {type(value).__name__}")
            if not math.isfinite(value) and field_name != 'p':
                raise ConfigError(field_name, "must be finite")
        elif expected is int:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(field_name, f"expected int, got {type(value).__name__}")
        elif expected is str:
            if not isinstance(value, str):
                raise ConfigError(field_name, f"expected str, got {type(value).__name__}")
        elif not isinstance(value, list):
            raise ConfigError(field_name, f"expected list, got {type(value).__name__}")

    if config.experiment not in EXPERIMENTS:
        raise ConfigError('experiment', f"{config.experiment!r} not in {', '.join(EXPERIMENTS)}")
    if not config.L > 0:
        raise ConfigError('L', f"{config.L} must be positive")
    if not _is_power_of_two(config.N) or config.N < 8:
        raise ConfigError('N', f"{config.N} must be a power of two >= 8")
    if config.kind not in KINDS:
        raise ConfigError('kind', f"{config.kind!r} not in {', '.join(KINDS)}")
    if config.a == 0:
        raise ConfigError('a', "must be nonzero")
    if config.b == 0:
        raise ConfigError('b', "must be nonzero")
    if config.part not in PARTS:
        raise ConfigError('part', f"{config.part!r} not in {', '.join(PARTS)}")
    if config.nmax < 1:
        raise ConfigError('nmax', f"{config.nmax} must be positive")
    if config.epsilon < 0:
        raise ConfigError('epsilon', f"{config.epsilon} must be nonnegative")
    if not (config.p > 1 and math.isfinite(config.p)):
        raise ConfigError('p', f"{config.p} must lie in (1, inf)")
    if any(later <= earlier for earlier, later in zip(config.shifts, config.shifts[1:])):
        raise ConfigError('shifts', f"{config.shifts} must be strictly increasing")
    if not config.shifts:
        raise ConfigError('shifts', "must not be empty")
    if config.trials < 1:
        raise ConfigError('trials', f"{config.trials} must be at least 1")
    if config.points < 1:
        raise ConfigError('points', f"{config.points} must be at least 1")
    if config.nodes < 10:
        raise ConfigError('nodes', f"{config.nodes} must be at least 10")
    unknown = [item for item in config.format if item not in FORMATS]
    if unknown or not config.format:
        raise ConfigError('format', f"{config.format} must be a nonempty subset of csv,json")
    if config.log_level.upper() not in LOG_LEVELS:
        raise ConfigError('log_level', f"{config.log_level!r} not a logging level")
    if config.max_log_file_size <= 0:
        raise ConfigError('max_log_file_size', "must be positive")

    if config.experiment in COEFF_EXPERIMENTS:
        if not _is_power_of_two(config.resolution):
            raise ConfigError('resolution', f"{config.resolution} must be a power of two")
        if config.resolution < 8 * config.nmax:
            raise ConfigError('resolution', f"{config.resolution} must be at least 8*nmax={8 * config.nmax}")
        if config.kind == 'circular':
            raise ConfigError('kind', "circular symbols have no Whitney decomposition here")
    if config.experiment == 'coeff_decay' and config.part == 'high-low':
        raise ConfigError('part', "high-low is the classical paraproduct piece; use low-high or high-high")
    if config.experiment in DYADIC_EXPERIMENTS and math.frexp(config.L)[0] != 0.5:
        raise ConfigError('L', f"{config.L} must be a power of two for dyadic experiments")
    if config.epsilon and config.epsilon < 2.0 * config.L / config.N * (1.0 - 1e-9):
        raise ConfigError('epsilon', f"{config.epsilon} is below the grid spacing {2.0 * config.L / config.N}")
    return config


class ConfigManager:
    """Manages configuration loading, validation and CLI overrides."""

    def __init__(self, config_path: Optional[str] = None):
        self.config_path = Path(config_path) if config_path else None
        self.config = ExperimentConfig()
        self.callbacks: List[Callable[[ExperimentConfig], None]] = []

    def load_config(self) -> ExperimentConfig:
        """Load configuration from a key=value file; missing file gives defaults."""
        if self.config_path is None or not self.config_path.exists():
            return self.config
        try:
            text = self.config_path.read_text(encoding='utf-8')
        except OSError as e:
            logger.error(f"Error loading config {self.config_path}: {e}. Using default configuration.")
            return self.config
        self.config = self._validate_config(parse_config_text(text))
        return self.config

    def save_config(self, path: Optional[str] = None) -> Path:
        """Write the current configuration as key=value text."""
        target = Path(path) if path else self.config_path
        if target is None:
            raise ConfigError('config_path', "no path to save to")
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(serialize_config(self.config), encoding='utf-8')
        return target

    def _validate_config(self, config: ExperimentConfig) -> ExperimentConfig:
        return validate_config(config)

    def update_config(self, updates: Dict[str, Any]) -> ExperimentConfig:
        """Apply overrides (e.g. CLI flags), validate, and notify callbacks."""
        for key in updates:
            if key not in FIELD_TYPES:
                raise ConfigError(key, "unknown key")
        merged = ExperimentConfig(**{**asdict(self.config), **updates})
        self.config = self._validate_config(merged)
        for callback in self.callbacks:
            callback(self.config)
        return self.config

    def register_callback(self, callback: Callable[[ExperimentConfig], None]) -> None:
        """Register callback for configuration changes."""
        self.callbacks.append(callback)

    def get_config(self) -> ExperimentConfig:
        """Get current configuration."""
        return self.config


# Global config manager instance
config_manager = ConfigManager()
