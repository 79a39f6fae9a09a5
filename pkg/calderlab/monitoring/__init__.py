"""Run tracking: manifests, events, history database and timing decorators."""
from .core import ensure_initialized, monitoring_system
from .database import RunHistory
from .decorators import monitor_all, monitor_execution, track_performance
from .event_bus import event_bus, EventBus
from .models import AssertionResult, PerformanceMetrics, RunManifest, check

__all__ = [
    'AssertionResult',
    'EventBus',
    'PerformanceMetrics',
    'RunHistory',
    'RunManifest',
    'check',
    'ensure_initialized',
    'event_bus',
    'monitor_all',
    'monitor_execution',
    'monitoring_system',
    'track_performance',
]
