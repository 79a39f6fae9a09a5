"""End-to-end test of calderlab experiments: runs, result files, manifests and the command line."""
import json
import os
import sys

import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from calderlab import experiments
from calderlab.cli import main
from calderlab.config import ExperimentConfig
from calderlab.experiments import manifest_path, run
from calderlab.monitoring import RunHistory, monitoring_system
from calderlab.monitoring.event_bus import event_bus


def small_config(tmp_path, **overrides):
    values = dict(
        out=str(tmp_path / 'results'),
        database_path=str(tmp_path / 'runs.db'),
        log_file_path=str(tmp_path / 'logs' / 'calderlab.log'),
        L=4.0,
        N=64,
        seed=5,
    )
    values.update(overrides)
    return ExperimentConfig(**values)


def load_manifest(config):
    path = manifest_path(config)
    assert path.exists(), f"Manifest missing at {path}"
    return json.loads(path.read_text(encoding='utf-8'))


def assertion_names(manifest):
    return {item['name']: item['passed'] for item in manifest['assertions']}


def test_symbol_eval_run(tmp_path):
    config = small_config(tmp_path, experiment='symbol_eval', kind='c1', xi=-1.0, xi1=4.0, nodes=1000)
    manifest = run(config)
    assert manifest.passed, f"Failures: {manifest.failures}"
    assert manifest.summary == {'value': 0.5, 'oracle': 0.5}
    data = load_manifest(config)
    assert data['passed'] is True and data['experiment'] == 'symbol_eval'
    assert sorted(os.path.basename(p) for p in data['artifacts']) == ['symbol_eval_c1.csv', 'symbol_eval_c1.json']
    print("✓ symbol_eval writes its table, report and manifest")


@pytest.mark.parametrize('kind', ['c1', 'c1plus', 'gen22', 'circular'])
def test_symbol_check_passes_for_every_kind(tmp_path, kind):
    config = small_config(tmp_path, experiment='symbol_check', kind=kind, a=2.0, b=0.5, points=200, nodes=10000)
    manifest = run(config)
    assert manifest.passed, f"{kind} failures: {manifest.failures}"
    names = {result.name for result in manifest.assertions}
    assert {'oracle_agreement', 'homogeneity', 'slope_jump', 'primitive_jumps'} <= names
    assert ('range_lower' in names) == (kind == 'c1plus')


def test_symbol_check_is_deterministic(tmp_path):
    outputs = []
    for name in ('first', 'second'):
        config = small_config(tmp_path, experiment='symbol_check', points=100, nodes=1000,
                              out=str(tmp_path / name))
        run(config)
        outputs.append((tmp_path / name / 'symbol_check_c1.csv').read_bytes())
    assert outputs[0] == outputs[1], "Same seed must give byte-identical tables"
    print("✓ Seeded runs are reproducible")


def test_heatmap_run(tmp_path):
    config = small_config(tmp_path, experiment='heatmap', kind='c1plus', format=['json'])
    manifest = run(config)
    assert manifest.passed, f"Failures: {manifest.failures}"
    names = assertion_names(load_manifest(config))
    assert names['cross_section_kinks'] and names['cross_section_linear_elsewhere']
    assert (tmp_path / 'results' / 'heatmap_c1plus.csv').exists()
    report = json.loads((tmp_path / 'results' / 'heatmap_c1plus_report.json').read_text(encoding='utf-8'))
    assert report['size'] == 512 and report['min'] >= 0.0
    print("✓ Heatmap dump and cross sections")


def test_duality_check_run(tmp_path):
    manifest = run(small_config(tmp_path, experiment='duality_check', kind='gen22', a=2.0, b=-1.0))
    assert manifest.passed, f"Failures: {manifest.failures}"
    assert [r.name for r in manifest.assertions] == ['star2_gap', 'star1_gap', 'pairing_gap']


def test_scale_uniformity_run(tmp_path):
    config = small_config(tmp_path, experiment='scale_uniformity', nmax=8, resolution=64)
    manifest = run(config)
    assert manifest.passed, f"Failures: {manifest.failures}"
    assert manifest.summary['max_deviation'] < 1e-12


def test_coeff_decay_run_records_symmetry(tmp_path):
    config = small_config(tmp_path, experiment='coeff_decay', kind='c1plus', part='high-high', nmax=8,
                          resolution=64)
    manifest = run(config)
    names = assertion_names(load_manifest(config))
    assert 'exception' not in names
    assert names['hermitian_symmetry']
    assert 'off_band_ratio' in names and 'fourier_synthesis' in names and 'C_quad' in manifest.summary


def test_cz_audit_run(tmp_path):
    config = small_config(tmp_path, experiment='cz_audit')
    manifest = run(config)
    assert manifest.passed, f"Failures: {manifest.failures}"
    names = assertion_names(load_manifest(config))
    assert {'cz_disjoint', 'cz_reconstruction', 'cz_stopping_time', 'cz_good_bound', 'cz_nontrivial'} <= set(names)
    assert (tmp_path / 'results' / 'cz_audit_intervals.csv').exists()
    print("✓ Calderon-Zygmund audit over all instances")


def test_shifted_norms_identities(tmp_path):
    config = small_config(tmp_path, experiment='shifted_norms', shifts=[1], trials=2)
    manifest = run(config)
    names = assertion_names(load_manifest(config))
    assert 'exception' not in names, manifest.failures
    for name in ('maximal_identity_floor', 'maximal_sublinear', 'square_sublinear', 'sharp_below_weighted',
                 'neighbour_domination', 'square_parseval'):
        assert names[name], f"{name} failed"


def test_model_growth_identities(tmp_path):
    config = small_config(tmp_path, experiment='model_growth', L=8.0, N=256, shifts=[1, 4], trials=2)
    manifest = run(config)
    names = assertion_names(load_manifest(config))
    assert 'exception' not in names, manifest.failures
    assert names['trilinear_sum_equivalence'] and names['single_interval_normalization']
    assert 'model_growth_exponent' in names


def test_operator_compare_uses_configured_epsilon(tmp_path):
    config = small_config(tmp_path, experiment='operator_compare', epsilon=0.25)
    manifest = run(config)
    names = assertion_names(load_manifest(config))
    assert 'exception' not in names, manifest.failures
    report = json.loads((tmp_path / 'results' / 'operator_compare.json').read_text(encoding='utf-8'))
    assert report['epsilon'] == 0.25 and report['hilbert']['epsilon'] == 0.25
    assert all(row['epsilon'] == 0.25 for row in report['pairs'])
    assert all(row['rel_l2_error'] >= 0.0 for row in report['pairs'])


def test_failed_run_still_writes_manifest(tmp_path, monkeypatch):
    def explode(config, ctx):
        raise RuntimeError("solver diverged")

    monkeypatch.setitem(experiments.EXPERIMENT_RUNNERS, 'symbol_eval', explode)
    events_received = []

    def tracker(event_type, data):
        events_received.append(event_type)

    config = small_config(tmp_path, experiment='symbol_eval')
    with event_bus.listening(['experiment.failed', 'experiment.completed'], tracker):
        manifest = run(config)

    assert not manifest.passed and manifest.failures == ['exception']
    assert 'solver diverged' in manifest.assertions[0].detail
    assert load_manifest(config)['passed'] is False
    assert events_received == ['experiment.failed', 'experiment.completed']
    print("✓ Failures are recorded in the manifest")


def test_cli_runs_and_records_history(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    db_path = tmp_path / 'history.db'
    argv = ['symbol_eval', '--xi', '-1', '--xi1', '4', '--nodes', '1000', '--out', 'results',
            '--database-path', str(db_path), '--log-level', 'warning']
    try:
        assert main(argv) == 0
        output = capsys.readouterr().out
        assert '✓ oracle_agreement' in output
        assert 'symbol_eval_manifest.json' in output

        monkeypatch.setitem(experiments.EXPERIMENT_RUNNERS, 'symbol_eval',
                            lambda config, ctx: ctx.require('always_false', False))
        assert main(argv) == 1
        assert '✗ always_false' in capsys.readouterr().out
    finally:
        monitoring_system.shutdown()

    runs = RunHistory(str(db_path)).query_runs(experiment='symbol_eval')
    assert [run_.passed for run_ in runs] == [False, True]
    metrics = RunHistory(str(db_path)).query_performance_metrics('calderlab.experiments.symbol_eval')
    assert [item.run_id for item in metrics] == [runs[1].run_id], "Timings carry the run they belong to"
    print("✓ Command line exit codes and run history")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
