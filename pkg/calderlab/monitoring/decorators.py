"""Function decorators for timing experiments and announcing their lifecycle."""
import functools
import logging
import os
import uuid
from datetime import datetime

import psutil

from .core import ensure_initialized, monitoring_system
from .event_bus import FUNCTION_COMPLETED, FUNCTION_FAILED, FUNCTION_STARTED, event_bus
from .models import PerformanceMetrics


def _run_id(args) -> str:
    """run_id of the run context among the call arguments, if any."""
    for arg in args:
        run_id = getattr(arg, 'run_id', None)
        if isinstance(run_id, str):
            return run_id
    return ""


def monitor_execution(func):
    """Publish function.started / function.completed / function.failed around a call."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        ensure_initialized()
        session_id = str(uuid.uuid4())[:8]
        run_id = _run_id(args)
        func_name = f"{func.__module__}.{func.__name__}"
        start_time = datetime.now()
        event_bus.publish(FUNCTION_STARTED, {
            'function_name': func_name,
            'session_id': session_id,
            'run_id': run_id,
            'timestamp': start_time.isoformat(),
        })

        try:
            result = func(*args, **kwargs)
        except Exception as error:
            duration = (datetime.now() - start_time).total_seconds()
            event_bus.publish(FUNCTION_FAILED, {
                'function_name': func_name,
                'session_id': session_id,
                'run_id': run_id,
                'error': str(error),
                'duration': duration,
            })
            raise

        duration = (datetime.now() - start_time).total_seconds()
        event_bus.publish(FUNCTION_COMPLETED, {
            'function_name': func_name,
            'session_id': session_id,
            'run_id': run_id,
            'duration': duration,
        })
        return result

    return wrapper


def track_performance(func):
    """Record execution time and memory use in the run history when tracking is on."""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        ensure_initialized()
        func_name = f"{func.__module__}.{func.__name__}"
        start_time = datetime.now()
        process = psutil.Process(os.getpid())
        initial_memory = process.memory_info().rss

        success = 0.0
        try:
            result = func(*args, **kwargs)
            success = 1.0
            return result
        finally:
            end_time = datetime.now()
            history = monitoring_system.history
            if history is not None:
                metrics = PerformanceMetrics(
                    timestamp=end_time,
                    function_name=func_name,
                    execution_time=(end_time - start_time).total_seconds(),
                    memory_peak=max(initial_memory, process.memory_info().rss),
                    cpu_usage=process.cpu_percent(),
                    success_rate=success,
                    run_id=_run_id(args),
                )
                try:
                    history.insert_performance_metrics(metrics)
                except Exception as e:
                    logging.error(f"Error recording performance metrics: {e}")

    return wrapper


def monitor_all(func):
    """Apply both lifecycle events and performance tracking."""
    return monitor_execution(track_performance(func))
