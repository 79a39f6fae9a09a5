"""Test script to verify the run tracking setup: event bus, run history, decorators and status."""
import sys
import os
from datetime import datetime
from types import SimpleNamespace

import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from calderlab.config import ExperimentConfig
from calderlab.monitoring import (AssertionResult, EventBus, PerformanceMetrics, RunHistory, RunManifest, check,
                                  ensure_initialized, monitor_all, monitor_execution, monitoring_system,
                                  track_performance)
from calderlab.monitoring.event_bus import FUNCTION_EVENTS, event_bus


def make_manifest(run_id, experiment='symbol_eval', passed=True):
    return RunManifest(
        run_id=run_id,
        experiment=experiment,
        config={'seed': 1},
        started_at=datetime(2024, 1, 1, 12, 0, 0),
        version='1.0.0',
        duration=0.5,
        artifacts=['results/a.csv'],
        assertions=[AssertionResult('oracle_agreement', passed, 1e-6, 4e-6)],
        summary={'value': 0.5},
    )


def test_event_bus():
    """Publish/subscribe round trip and handler isolation."""
    bus = EventBus()
    events_received = []

    def handler(event_type, data):
        events_received.append((event_type, data))

    def broken(event_type, data):
        raise RuntimeError("handler failure")

    bus.subscribe('experiment.started', broken)
    bus.subscribe('experiment.started', handler)
    bus.publish('experiment.started', {'run_id': 'abc'})
    assert events_received == [('experiment.started', {'run_id': 'abc'})], "Failing handler must not block others"
    assert bus.get_subscriber_count('experiment.started') == 2

    bus.unsubscribe('experiment.started', broken)
    assert bus.get_subscriber_count('experiment.started') == 1
    bus.clear_subscribers()
    assert bus.get_subscriber_count('experiment.started') == 0
    print("✓ Event bus working")


def test_assertion_checks():
    assert check('gap', 1e-3, 1e-2).passed
    assert not check('gap', 1e-1, 1e-2).passed
    assert check('jump', 2.0, 0.1, upper=False).passed
    assert not check('gap', float('nan'), 1.0).passed, "NaN never passes"
    result = AssertionResult.from_dict(check('gap', 0.5, 1.0, detail='x').to_dict())
    assert result.passed and result.value == 0.5 and result.detail == 'x'
    print("✓ Assertion checks")


def test_manifest_serialization():
    manifest = make_manifest('r1', passed=False)
    data = manifest.to_dict()
    assert data['passed'] is False and data['summary'] == {'value': 0.5}
    restored = RunManifest.from_dict(data)
    assert restored.failures == ['oracle_agreement']
    assert restored.started_at == manifest.started_at
    print("✓ Run manifests serialize")


def test_run_history(tmp_path):
    """Runs and metrics are stored and queried newest first."""
    history = RunHistory(str(tmp_path / 'db' / 'runs.db'))
    history.insert_run(make_manifest('r1'))
    history.insert_run(make_manifest('r2', experiment='heatmap', passed=False))
    history.insert_run(make_manifest('r3'))

    runs = history.query_runs()
    assert [run.run_id for run in runs] == ['r3', 'r2', 'r1']
    assert [run.run_id for run in history.query_runs(experiment='symbol_eval', limit=1)] == ['r3']

    history.insert_performance_metrics(PerformanceMetrics(
        timestamp=datetime.now(), function_name='calderlab.experiments.heatmap',
        execution_time=0.25, memory_peak=1024,
    ))
    metrics = history.query_performance_metrics('calderlab.experiments.heatmap')
    assert len(metrics) == 1 and metrics[0].execution_time == 0.25

    stats = history.get_database_stats()
    assert stats == {'runs_count': 3, 'failed_runs_count': 1, 'performance_metrics_count': 1}
    print("✓ Run history operational")


def test_decorators_publish_lifecycle_events(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    events_received = []

    def tracker(event_type, data):
        events_received.append((event_type, data['function_name']))

    @monitor_execution
    def succeed(x):
        return x * 2

    @monitor_all
    def fail():
        raise ValueError("boom")

    try:
        with event_bus.listening(FUNCTION_EVENTS, tracker):
            assert succeed(21) == 42
            with pytest.raises(ValueError):
                fail()
        assert monitoring_system.is_initialized(), "Decorated calls start run tracking"
    finally:
        monitoring_system.shutdown()
    assert all(event_bus.get_subscriber_count(event_type) == 0 for event_type in FUNCTION_EVENTS)

    kinds = [event_type for event_type, _ in events_received]
    assert kinds == ['function.started', 'function.completed', 'function.started', 'function.failed']
    assert events_received[0][1].endswith('.succeed')
    print("✓ Decorators publish lifecycle events")


def test_monitoring_system_records_metrics(tmp_path):
    config = ExperimentConfig(
        database_path=str(tmp_path / 'runs.db'),
        log_file_path=str(tmp_path / 'logs' / 'calderlab.log'),
    )
    monitoring_system.initialize(config)
    try:
        assert monitoring_system.is_initialized(), "Monitoring system should be initialized"

        @track_performance
        def work():
            return sum(range(100))

        assert work() == 4950
        ensure_initialized()
        assert monitoring_system.history.db_path == str(tmp_path / 'runs.db'), "An open history is kept"

        @track_performance
        def step(ctx):
            return ctx.run_id

        assert step(SimpleNamespace(run_id='abc12345')) == 'abc12345'
        stored = monitoring_system.history.query_performance_metrics(f"{__name__}.step")
        assert [item.run_id for item in stored] == ['abc12345']
        status = monitoring_system.get_status()
        assert status['status'] == 'running', "System should be running"
        assert status['database_stats']['performance_metrics_count'] == 2
        assert status['config']['database_path'] == str(tmp_path / 'runs.db')
        assert 'experiment.completed' in status['event_bus_subscribers']
        assert (tmp_path / 'logs' / 'calderlab.log').exists()
    finally:
        monitoring_system.shutdown()
    assert not monitoring_system.is_initialized()
    assert monitoring_system.get_status() == {'status': 'not_initialized'}
    print("✓ System status check passed")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
