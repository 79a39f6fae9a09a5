#!/usr/bin/env python3
"""
Tests for CSV/JSON result files and plot-ready dumps.
"""

import json
import math
import os
import sys

import numpy as np
import pandas as pd
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from calderlab.export import (as_frame, emit_plot_data, function_frame, heatmap_axis, symbol_heatmap, write_json,
                              write_outputs, write_table)
from calderlab.grid import SampledFunction, make_grid
from calderlab.symbols import c1_sgn, circular, separable_sgn


def test_write_json_is_sorted_and_finite(tmp_path):
    path = write_json({'b': np.float64(1.5), 'a': [math.inf, 2], 'c': 1 + 2j}, tmp_path / 'out' / 'r.json')
    text = path.read_text(encoding='utf-8')
    assert text.endswith('\n')
    data = json.loads(text)
    assert list(data) == ['a', 'b', 'c']
    assert data['a'] == ['inf', 2] and data['b'] == 1.5
    assert data['c'] == {'re': 1.0, 'im': 2.0}
    print("✓ JSON reports are sorted, finite and UTF-8")


def test_write_table_keeps_full_precision(tmp_path):
    frame = pd.DataFrame({'n': [2, 1], 'value': [1.0 / 3.0, 0.1]})
    path = write_table(frame, tmp_path / 't.csv', sort_by=['n'])
    lines = path.read_text(encoding='utf-8').splitlines()
    assert lines[0] == 'n,value'
    assert lines[1] == '1,0.10000000000000001'
    assert float(lines[2].split(',')[1]) == 1.0 / 3.0
    print("✓ Tables keep 17 significant digits and a stable order")


def test_emit_plot_data_rejects_empty_table(tmp_path):
    with pytest.raises(ValueError, match='Empty table'):
        emit_plot_data(pd.DataFrame(), tmp_path / 'empty.csv')
    with pytest.raises(ValueError):
        as_frame(42)
    path = emit_plot_data([{'x': 1, 'y': 2}], tmp_path / 'p.csv')
    assert path.exists()
    print("✓ Plot dumps refuse empty tables")


def test_function_frame():
    grid = make_grid(2, 8)
    frame = function_frame(SampledFunction(grid, np.arange(8.0)), 'f')
    assert list(frame.columns) == ['x', 'f']
    assert frame['x'].iloc[0] == -2.0 and frame['f'].iloc[-1] == 7.0
    print("✓ Sampled functions export as (x, value) columns")


def test_heatmap_axis_hits_singular_lines():
    axis = heatmap_axis()
    assert axis.size == 512 and axis[0] == -8.0
    for value in (0.0, -1.0, 2.0, 4.0):
        assert np.any(axis == value)
    print("✓ Heatmap axis contains the singular lines")


def test_symbol_heatmap_shape_and_columns():
    frame = symbol_heatmap(c1_sgn(), size=16, extent=4.0)
    assert len(frame) == 256
    assert list(frame.columns) == ['xi', 'xi1', 'value']
    assert frame['value'].abs().max() <= 1.0
    assert list(symbol_heatmap(circular(1.0, 1.0), size=4).columns) == ['xi1', 'xi2', 'value']
    with pytest.raises(ValueError):
        symbol_heatmap(c1_sgn(), size=1)
    with pytest.raises(ValueError):
        symbol_heatmap(separable_sgn(1), size=4)
    print("✓ Symbol heatmaps are long-form and real")


def test_write_outputs_respects_formats(tmp_path):
    frame = pd.DataFrame({'a': [1]})
    report = {'a': 1}
    written = write_outputs(tmp_path / 'stem', ['json'], frame, report)
    assert written == [str(tmp_path / 'stem.json')]
    written = write_outputs(tmp_path / 'both', ['csv', 'json'], frame, report)
    assert sorted(os.path.basename(p) for p in written) == ['both.csv', 'both.json']
    print("✓ Output formats are honoured")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
