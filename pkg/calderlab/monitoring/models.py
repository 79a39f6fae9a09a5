"""Data models for run tracking."""
from dataclasses import dataclass, field
from datetime import datetime
from typing import Any, Dict, List, Optional
import json
import math


def _clean(value: Any) -> Any:
    """JSON-safe scalar: numpy scalars unwrapped, non-finite floats as strings."""
    if hasattr(value, 'item') and not isinstance(value, (list, dict)):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


@dataclass
class AssertionResult:
    name: str
    passed: bool
    value: Optional[float] = None
    threshold: Optional[float] = None
    detail: str = ""

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'name': self.name,
            'passed': bool(self.passed),
            'value': _clean(self.value),
            'threshold': _clean(self.threshold),
            'detail': self.detail,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AssertionResult':
        return cls(
            name=data['name'],
            passed=bool(data['passed']),
            value=data.get('value'),
            threshold=data.get('threshold'),
            detail=data.get('detail', ''),
        )


def check(name: str, value: float, threshold: float, upper: bool = True, detail: str = "") -> AssertionResult:
    """value <= threshold (or >= when upper is False)."""
    value = float(value)
    passed = value <= threshold if upper else value >= threshold
    return AssertionResult(name=name, passed=bool(passed and not math.isnan(value)),
                           value=value, threshold=float(threshold), detail=detail)


@dataclass
class RunManifest:
    run_id: str
    experiment: str
    config: Dict[str, Any]
    started_at: datetime
    version: str
    duration: float = 0.0
    artifacts: List[str] = field(default_factory=list)
    assertions: List[AssertionResult] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(result.passed for result in self.assertions)

    @property
    def failures(self) -> List[str]:
        return [result.name for result in self.assertions if not result.passed]

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'run_id': self.run_id,
            'experiment': self.experiment,
            'config': self.config,
            'started_at': self.started_at.isoformat(),
            'duration': self.duration,
            'version': self.version,
            'artifacts': list(self.artifacts),
            'assertions': [result.to_dict() for result in self.assertions],
            'passed': self.passed,
            'summary': {key: _clean(value) for key, value in self.summary.items()},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunManifest':
        """Create RunManifest from dictionary."""
        return cls(
            run_id=data['run_id'],
            experiment=data['experiment'],
            config=data.get('config', {}),
            started_at=datetime.fromisoformat(data['started_at']),
            version=data.get('version', ''),
            duration=data.get('duration', 0.0),
            artifacts=list(data.get('artifacts', [])),
            assertions=[AssertionResult.from_dict(item) for item in data.get('assertions', [])],
            summary=dict(data.get('summary', {})),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


@dataclass
class PerformanceMetrics:
    timestamp: datetime
    function_name: str
    execution_time: float
    memory_peak: int
    cpu_usage: float = 0.0
    success_rate: float = 1.0
    run_id: str = ""

    def to_dict(self) -> Dict[str, Any]:
        """Convert to dictionary for JSON serialization."""
        return {
            'timestamp': self.timestamp.isoformat(),
            'function_name': self.function_name,
            'execution_time': self.execution_time,
            'memory_peak': self.memory_peak,
            'cpu_usage': self.cpu_usage,
            'success_rate': self.success_rate,
            'run_id': self.run_id,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'PerformanceMetrics':
        """Create PerformanceMetrics from dictionary."""
        return cls(
            timestamp=datetime.fromisoformat(data['timestamp']),
            function_name=data['function_name'],
            execution_time=data['execution_time'],
            memory_peak=data['memory_peak'],
            cpu_usage=data.get('cpu_usage', 0.0),
            success_rate=data.get('success_rate', 1.0),
            run_id=data.get('run_id', ''),
        )
