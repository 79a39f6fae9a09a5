"""Result files: CSV tables, JSON reports and plot-ready dumps."""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Iterable, List, Sequence, Union

import numpy as np
import pandas as pd

from .grid import SampledFunction
from .symbols import SymbolDescriptor, SymbolKind

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
HEATMAP_SIZE = 512
HEATMAP_EXTENT = 8.0


def _json_default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, complex):
        return {'re': value.real, 'im': value.imag}
    if hasattr(value, 'to_dict'):
        return value.to_dict()
    if hasattr(value, 'value'):
        return value.value
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def _finite(value: Any) -> Any:
    """Replace non-finite floats by strings; json would otherwise emit NaN/Infinity."""
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def write_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(_finite(data), f, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default)
        f.write('\n')
    logger.debug(f"Wrote {path}")
    return path


def write_table(frame: pd.DataFrame, path: Union[str, Path],
                sort_by: Sequence[str] = ()) -> Path:
    """UTF-8 CSV with a header row and 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if sort_by:
        frame = frame.sort_values(list(sort_by), kind='mergesort').reset_index(drop=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, encoding='utf-8')
    logger.debug(f"Wrote {len(frame)} rows to {path}")
    return path


def as_frame(table: Any) -> pd.DataFrame:
    """A DataFrame, anything with to_frame(), or a list of row dicts."""
    if isinstance(table, pd.DataFrame):
        return table
    if hasattr(table, 'to_frame'):
        return table.to_frame()
    if isinstance(table, (list, tuple)):
        return pd.DataFrame(list(table))
    raise ValueError(f"Unsupported table type: {type(table).__name__}")


def emit_plot_data(table: Any, path: Union[str, Path], sort_by: Sequence[str] = ()) -> Path:
    """Write a tabular result as plot-ready CSV."""
    frame = as_frame(table)
    if frame.empty:
        raise ValueError("Empty table: nothing to plot")
    return write_table(frame, path, sort_by)


def function_frame(f: SampledFunction, name: str = 'value') -> pd.DataFrame:
    """Two-column (x, value) frame of a real sampled function; imaginary parts are dropped."""
    return pd.DataFrame({'x': f.grid.points(), name: f.values.real})


def heatmap_axis(size: int = HEATMAP_SIZE, extent: float = HEATMAP_EXTENT) -> np.ndarray:
    """-extent + 2*extent*i/size; contains 0 and the singular lines exactly."""
    return -extent + 2.0 * extent * np.arange(size) / size


def heatmap_columns(descriptor: SymbolDescriptor) -> List[str]:
    if descriptor.kind is SymbolKind.CIRCULAR:
        return ['xi1', 'xi2']
    return ['xi', 'xi1']


def symbol_heatmap(descriptor: SymbolDescriptor, size: int = HEATMAP_SIZE,
                   extent: float = HEATMAP_EXTENT) -> pd.DataFrame:
    """Long-form dump (first, second, value) of a real symbol on a size x size grid."""
    if size < 2:
        raise ValueError(f"Invalid heatmap size={size}: must be at least 2")
    if not descriptor.is_real:
        raise ValueError(f"Heatmap needs a real symbol, got {descriptor.formula}")
    axis = heatmap_axis(size, extent)
    first, second = np.meshgrid(axis, axis, indexing='ij')
    values = np.asarray(descriptor.evaluate(first, second), dtype=float)
    names = heatmap_columns(descriptor)
    return pd.DataFrame({names[0]: first.ravel(), names[1]: second.ravel(), 'value': values.ravel()})


def write_outputs(stem: Union[str, Path], formats: Iterable[str], frame: pd.DataFrame = None,
                  report: Dict[str, Any] = None, sort_by: Sequence[str] = ()) -> List[str]:
    """Write <stem>.csv and/or <stem>.json according to formats; returns the paths written."""
    stem = Path(stem)
    formats = set(formats)
    written = []
    if 'csv' in formats and frame is not None:
        written.append(str(write_table(frame, stem.with_suffix('.csv'), sort_by)))
    if 'json' in formats and report is not None:
        written.append(str(write_json(report, stem.with_suffix('.json'))))
    return written
