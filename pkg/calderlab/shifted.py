"""Shifted maximal and square functions, the Hardy-Littlewood maximal function and the
Calderon-Zygmund decomposition on the dyadic tree of a grid."""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.ndimage import maximum_filter1d
from scipy.signal import fftconvolve
from sklearn.linear_model import LinearRegression

from .grid import (BumpType, Direction, DyadicInterval, Grid, SampledFunction, Side, bracket, dft,
                   frame_packet, lp_norm, make_grid)

logger = logging.getLogger(__name__)

WEIGHT_EXPONENT = 100
WEIGHT_REACH = (2, 3)       # kernel support [-2|I|, 3|I|) around the left end of I_n
SQUARE_MIN_CELLS = 4        # square function scales 4h <= |I| <= L/4


class GrowthOperator(str, Enum):
    MAXIMAL = "maximal"
    SHARP_MAXIMAL = "sharp_maximal"
    SQUARE = "square"


def require_dyadic_domain(grid: Grid) -> None:
    mantissa, _ = math.frexp(grid.L)
    if mantissa != 0.5:
        raise ValueError(f"Invalid half width L={grid.L}: dyadic tree needs a power of two")


def tree_levels(grid: Grid, min_cells: int = 1, max_cells: Optional[int] = None) -> List[int]:
    """Block sizes b (samples per cell) of the aligned dyadic levels, from h up to L."""
    require_dyadic_domain(grid)
    top = grid.N // 2 if max_cells is None else max_cells
    levels = []
    b = min_cells
    while b <= top:
        levels.append(b)
        b *= 2
    return levels


def cell_interval(grid: Grid, block: int, cell: int) -> DyadicInterval:
    """The DyadicInterval of cell `cell` at block size `block`."""
    length = block * grid.h
    k = int(round(math.log2(length)))
    offset = int(round(grid.L / length))
    return DyadicInterval(k, cell - offset)


def interval_cells(grid: Grid, interval: DyadicInterval) -> Tuple[int, int]:
    """(block size, cell index) of an aligned interval."""
    block = int(round(interval.length / grid.h))
    return block, int(round((interval.left + grid.L) / interval.length))


def _absolute(f: SampledFunction) -> np.ndarray:
    if f.side is not Side.SPACE:
        raise ValueError("Side mismatch: maximal operators expect a space-side function")
    require_dyadic_domain(f.grid)
    return np.abs(f.values)


def _shift_cells(values: np.ndarray, n: int) -> np.ndarray:
    """out[c] = values[c - n], zero where c - n leaves the domain."""
    count = values.size
    out = np.zeros_like(values)
    if abs(n) >= count:
        return out
    if n >= 0:
        out[n:] = values[:count - n]
    else:
        out[:count + n] = values[-n:]
    return out


def sharp_shifted_maximal(f: SampledFunction, n: int) -> SampledFunction:
    """sup over dyadic I containing x of the average of |f| over I_n."""
    absf = _absolute(f)
    grid = f.grid
    out = np.zeros(grid.N)
    for block in tree_levels(grid):
        averages = absf.reshape(-1, block).mean(axis=1)
        out = np.maximum(out, np.repeat(_shift_cells(averages, int(n)), block))
    return SampledFunction(grid, out)


def _weight_offsets(block: int) -> np.ndarray:
    """Weights (1 + dist(y, I_n)/|I_n|)^-100 for sample midpoints at offsets r in [-2b, 3b) from I_n."""
    lo, hi = WEIGHT_REACH
    r = np.arange(-lo * block, hi * block)
    middle = r + 0.5
    dist = np.where(r < 0, -middle, np.where(r >= block, middle - block, 0.0))
    return (1.0 + dist / block) ** (-WEIGHT_EXPONENT)


def shifted_maximal(f: SampledFunction, n: int) -> SampledFunction:
    """sup over dyadic I containing x of |I|^-1 integral |f| (1 + dist(y, I_n)/|I|)^-100.

    The weight is applied on [-2|I|, 3|I|) around I_n; beyond that it is below 3^-100.
    """
    absf = _absolute(f)
    grid = f.grid
    lo, hi = WEIGHT_REACH
    span = lo + hi
    out = np.zeros(grid.N)
    for block in tree_levels(grid):
        cells = grid.N // block
        pad = span * block
        padded = np.concatenate([np.zeros(pad), absf, np.zeros(pad)])
        blocks = padded.reshape(-1, block)
        weights = _weight_offsets(block).reshape(span, block)
        # partial[B, q] = <block B, weight slab q>
        partial = blocks @ weights.T
        source = np.arange(cells) - int(n)
        total = np.zeros(cells)
        for q in range(span):
            rows = source + span - lo + q
            valid = (rows >= 0) & (rows < partial.shape[0])
            total[valid] += partial[rows[valid], q]
        out = np.maximum(out, np.repeat(total / block, block))
    return SampledFunction(grid, out)


def brute_force_maximal(f: SampledFunction, n: int, index: int, weighted: bool = True) -> float:
    """Direct evaluation at one sample over every tree interval containing it, full-domain weights."""
    absf = _absolute(f)
    grid = f.grid
    best = 0.0
    samples = np.arange(grid.N)
    for block in tree_levels(grid):
        start = (index // block - int(n)) * block
        if weighted:
            r = samples - start
            middle = r + 0.5
            dist = np.where(r < 0, -middle, np.where(r >= block, middle - block, 0.0))
            value = float(np.sum(absf * (1.0 + dist / block) ** (-WEIGHT_EXPONENT))) / block
        else:
            inside = (samples >= start) & (samples < start + block)
            value = float(np.sum(absf[inside])) / block
        best = max(best, value)
    return best


def hardy_littlewood_maximal(f: SampledFunction) -> SampledFunction:
    """sup over all runs of grid cells containing x of the average of |f|."""
    if f.side is not Side.SPACE:
        raise ValueError("Side mismatch: maximal operators expect a space-side function")
    absf = np.abs(f.values)
    N = f.grid.N
    cumulative = np.concatenate([[0.0], np.cumsum(absf)])
    out = np.zeros(N)
    for width in range(1, N + 1):
        means = (cumulative[width:] - cumulative[:-width]) / width
        # extended[s + width - 1] = means[s]; sample i sees starts s in [i - width + 1, i]
        extended = np.zeros(N + width - 1)
        extended[width - 1:width - 1 + means.size] = means
        windowed = maximum_filter1d(extended, size=width, mode='constant', cval=0.0)
        out = np.maximum(out, windowed[width // 2:width // 2 + N])
    return SampledFunction(f.grid, out)


def brute_force_hardy_littlewood(f: SampledFunction, index: int) -> float:
    absf = np.abs(f.values)
    N = f.grid.N
    best = 0.0
    for start in range(0, index + 1):
        for stop in range(index + 1, N + 1):
            best = max(best, float(absf[start:stop].mean()))
    return best


def level_set_measure(f: SampledFunction, lam: float) -> float:
    return f.grid.h * int(np.count_nonzero(np.abs(f.values) > lam))


def covering_ratio(f: SampledFunction, n: int, lam: float) -> float:
    """|{sharp shifted maximal > lam}| / |{Hardy-Littlewood maximal > lam}|."""
    shifted = level_set_measure(sharp_shifted_maximal(f, n), lam)
    classical = level_set_measure(hardy_littlewood_maximal(f), lam)
    if classical == 0.0:
        return 0.0 if shifted == 0.0 else math.inf
    return shifted / classical


def covering_bound(n: int) -> float:
    return 4.0 * (1.0 + math.log2(bracket(n)))


def neighbour_domination_gap(f: SampledFunction, n: int) -> float:
    """max of M^n f - (sharp M^{n-1} + sharp M^n + sharp M^{n+1}) f; at most the far weight tail."""
    total = (sharp_shifted_maximal(f, n - 1).values.real
             + sharp_shifted_maximal(f, n).values.real
             + sharp_shifted_maximal(f, n + 1).values.real)
    return float(np.max(shifted_maximal(f, n).values.real - total))


# Shifted square function

@lru_cache(maxsize=64)
def _square_template(L: float, N: int, block: int) -> np.ndarray:
    """Orthonormal packet of scale block*h sampled at offsets r*h - |I|/2, r in [-N, N], on a 4N grid."""
    wide = make_grid(4.0 * L, 4 * N)
    length = block * wide.h
    k = int(round(math.log2(length)))
    packet = frame_packet(wide, DyadicInterval(k, 0), center=0.0).values
    origin = 2 * N                        # wide grid index of x = 0
    r = np.arange(-N, N + 1)
    return packet[origin + r - block // 2]


def square_levels(grid: Grid) -> List[int]:
    return tree_levels(grid, min_cells=SQUARE_MIN_CELLS, max_cells=grid.N // 8)


def packet_coefficients(f: SampledFunction, block: int) -> np.ndarray:
    """<f, Phi_J> for every cell J at the given block size (orthonormal packets centered on J)."""
    grid = f.grid
    template = _square_template(grid.L, grid.N, block)
    # full[s + N] = sum_j f_j template[N + j - s]
    full = fftconvolve(f.values, template[::-1], mode='full')
    starts = np.arange(0, grid.N, block)
    return grid.h * full[starts + grid.N]


def shifted_square(f: SampledFunction, n: int,
                   bump_type: Union[str, BumpType] = BumpType.PSI) -> SampledFunction:
    """(sum over tree I containing x of |<f, Phi_{I_n}>|^2 / |I|)^{1/2}; I_n outside the domain contributes 0."""
    if BumpType(bump_type) is not BumpType.PSI:
        raise ValueError("Invalid bump type: the square function needs psi-type packets")
    if f.side is not Side.SPACE:
        raise ValueError("Side mismatch: square function expects a space-side function")
    grid = f.grid
    require_dyadic_domain(grid)
    total = np.zeros(grid.N)
    for block in square_levels(grid):
        coeffs = _shift_cells(packet_coefficients(f, block), int(n))
        total += np.repeat(np.abs(coeffs) ** 2 / (block * grid.h), block)
    return SampledFunction(grid, np.sqrt(total))


def square_coefficient_energy(f: SampledFunction, n: int) -> float:
    """sum over the tree of |<f, Phi_{I_n}>|^2, equal to ||S^n f||_2^2."""
    energy = 0.0
    for block in square_levels(f.grid):
        coeffs = _shift_cells(packet_coefficients(f, block), int(n))
        energy += float(np.sum(np.abs(coeffs) ** 2))
    return energy


# Calderon-Zygmund decomposition

@dataclass
class CZResult:
    level: float
    intervals: List[DyadicInterval]
    good: SampledFunction
    bad: List[Tuple[DyadicInterval, SampledFunction]]
    omega_measure: float
    root_selected: bool = False

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([interval.to_dict() for interval in self.intervals],
                            columns=['k', 'n_index'])


def _selection_mask(grid: Grid, absf: np.ndarray, lam: float):
    """Top-down stopping time: first tree interval on each branch with average > lam."""
    covered = np.zeros(grid.N, dtype=bool)
    selected = []
    for block in reversed(tree_levels(grid)):
        averages = absf.reshape(-1, block).mean(axis=1)
        free = ~covered.reshape(-1, block).any(axis=1)
        for cell in np.flatnonzero(free & (averages > lam)):
            selected.append((block, int(cell)))
            covered[cell * block:(cell + 1) * block] = True
    return selected, covered


def cz_decompose(f: SampledFunction, lam: float) -> CZResult:
    """f = g + sum b_J over maximal dyadic J with average of |f| above lam."""
    if not lam > 0:
        raise ValueError(f"Invalid level lambda={lam}: must be positive")
    absf = _absolute(f)
    grid = f.grid
    selected, covered = _selection_mask(grid, absf, lam)
    good = np.where(covered, 0.0, f.values)
    bad = []
    intervals = []
    root_selected = False
    top = grid.N // 2
    for block, cell in sorted(selected, key=lambda item: item[1] * item[0]):
        part = slice(cell * block, (cell + 1) * block)
        mean = f.values[part].mean()
        good[part] = mean
        b_values = np.zeros(grid.N, dtype=complex)
        b_values[part] = f.values[part] - mean
        interval = cell_interval(grid, block, cell)
        intervals.append(interval)
        bad.append((interval, SampledFunction(grid, b_values)))
        if block == top:
            root_selected = True
    if root_selected:
        logger.warning(f"Level lambda={lam:g} selects a root interval; good part bound may fail")
    omega = grid.h * int(np.count_nonzero(covered))
    return CZResult(level=float(lam), intervals=intervals, good=SampledFunction(grid, good),
                    bad=bad, omega_measure=omega, root_selected=root_selected)


def _stopping_time_check(f: SampledFunction, result: CZResult) -> bool:
    """Bottom-up recomputation: each selected J exceeds lam while all its ancestors do not,
    and no free sample sits in a tree interval with average above lam."""
    grid = f.grid
    absf = np.abs(f.values)
    lam = result.level
    top = grid.N // 2

    def average(block: int, cell: int) -> float:
        return float(absf[cell * block:(cell + 1) * block].mean())

    covered = np.zeros(grid.N, dtype=bool)
    for interval in result.intervals:
        block, cell = interval_cells(grid, interval)
        if not average(block, cell) > lam:
            return False
        parent_block, parent_cell = block, cell
        while parent_block < top:
            parent_block, parent_cell = parent_block * 2, parent_cell // 2
            if average(parent_block, parent_cell) > lam:
                return False
        covered[cell * block:(cell + 1) * block] = True
    for block in tree_levels(grid):
        averages = absf.reshape(-1, block).mean(axis=1)
        free = ~covered.reshape(-1, block).any(axis=1)
        if np.any(free & (averages > lam)):
            return False
    return True


def verify_cz(f: SampledFunction, result: CZResult, tolerance: float = 1e-12) -> Dict[str, bool]:
    grid = f.grid
    lam = result.level
    scale = max(1.0, float(np.max(np.abs(f.values), initial=0.0)))
    spans = sorted((interval.left, interval.right) for interval in result.intervals)
    disjoint = all(spans[i][1] <= spans[i + 1][0] for i in range(len(spans) - 1))

    total = result.good.values.copy()
    supported = True
    mean_zero = True
    points = grid.points()
    for interval, part in result.bad:
        total = total + part.values
        outside = (points < interval.left) | (points >= interval.right)
        supported = supported and bool(np.all(part.values[outside] == 0))
        mean_zero = mean_zero and abs(grid.h * np.sum(part.values)) <= tolerance * scale * interval.length

    checks = {
        'disjoint': disjoint,
        'reconstruction': bool(np.max(np.abs(total - f.values), initial=0.0) <= tolerance * scale),
        'bad_supported': supported,
        'bad_mean_zero': bool(mean_zero),
        'omega_bound': result.omega_measure <= lp_norm(f, 1) / lam,
        'stopping_time': _stopping_time_check(f, result),
    }
    if not result.root_selected:
        checks['good_bound'] = bool(np.max(np.abs(result.good.values)) <= 2.0 * lam + tolerance)
    return checks


# Adversarial norm measurement

@dataclass
class NormGrowthTable:
    operator: str
    p: float
    shifts: List[int]
    norms: List[float]
    fit: Dict[str, float] = field(default_factory=dict)
    residual: float = 0.0
    root_fit: Dict[str, float] = field(default_factory=dict)
    power_exponent: Optional[float] = None

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            'n': self.shifts,
            'bracket': [bracket(n) for n in self.shifts],
            'measured_norm': self.norms,
        })

    def fit_record(self) -> Dict[str, object]:
        return {
            'operator': self.operator,
            'p': self.p,
            'fit': self.fit,
            'residual': self.residual,
            'root_fit': self.root_fit,
            'power_exponent': self.power_exponent,
        }


def adversarial_input(grid: Grid, trial: int, rng: np.random.Generator) -> SampledFunction:
    """Translated spike, random +-1 dyadic comb or indicator train, cycling with the trial index."""
    N = grid.N
    values = np.zeros(N)
    family = trial % 3
    if family == 0:
        values[rng.integers(N // 4, 3 * N // 4)] = 1.0
    elif family == 1:
        block = 1 << int(rng.integers(0, max(1, int(math.log2(N)) - 3)))
        signs = rng.choice([-1.0, 1.0], size=N // block)
        keep = rng.random(N // block) < 0.5
        values = np.repeat(signs * keep, block)
        if not np.any(values):
            values[N // 2] = 1.0
    else:
        width = 1 << int(rng.integers(0, 3))
        spacing = width << int(rng.integers(1, 5))
        start = int(rng.integers(0, spacing))
        for left in range(start, N, spacing):
            values[left:left + width] = 1.0
    return SampledFunction(grid, values)


def sparse_steps(grid: Grid, rng: np.random.Generator, blocks: int = 4) -> SampledFunction:
    """A few random dyadic-width plateaus with heights in [1/2, 1] on an otherwise zero function."""
    values = np.zeros(grid.N)
    for _ in range(blocks):
        width = 1 << int(rng.integers(0, 5))
        start = int(rng.integers(0, grid.N - width))
        values[start:start + width] = rng.uniform(0.5, 1.0)
    return SampledFunction(grid, values)


def band_limited_input(grid: Grid, rng: np.random.Generator) -> SampledFunction:
    """Random real f with spectrum in 16/L <= |xi| <= 1/(8h), under a Gaussian envelope of width L/4.

    The band sits inside the range the square function tree resolves exactly; the envelope
    keeps f away from the domain ends.
    """
    low, high = 16.0 / grid.L, 1.0 / (8.0 * grid.h)
    if low >= high:
        raise ValueError(f"Grid N={grid.N} too coarse for a band-limited input at L={grid.L}")
    xi = np.abs(grid.frequencies())
    band = (xi >= low) & (xi <= high)
    spectrum = np.where(band, rng.standard_normal(grid.N) + 1j * rng.standard_normal(grid.N), 0.0)
    carrier = dft(SampledFunction(grid, spectrum, Side.FREQUENCY), Direction.INVERSE).values.real
    envelope = np.exp(-np.pi * (grid.points() / (grid.L / 4.0)) ** 2)
    values = carrier * envelope
    return SampledFunction(grid, values / math.sqrt(grid.h * float(np.sum(values ** 2))))


CZ_FAMILIES = ('gaussian_noise', 'spikes', 'heavy_steps')


def cz_input(grid: Grid, instance: int, rng: np.random.Generator) -> SampledFunction:
    """Test function for the decomposition audit, cycling through CZ_FAMILIES."""
    N = grid.N
    family = CZ_FAMILIES[instance % len(CZ_FAMILIES)]
    if family == 'gaussian_noise':
        values = rng.standard_normal(N)
    elif family == 'spikes':
        values = np.zeros(N)
        spots = rng.choice(N, size=int(rng.integers(1, 9)), replace=False)
        values[spots] = rng.uniform(-10.0, 10.0, spots.size)
    else:
        block = 1 << int(rng.integers(0, 5))
        values = np.repeat(rng.pareto(1.5, N // block) * rng.choice([-1.0, 1.0], N // block), block)
    if not np.any(values):
        values[N // 2] = 1.0
    return SampledFunction(grid, values)


def _apply(operator: GrowthOperator, f: SampledFunction, n: int) -> SampledFunction:
    if operator is GrowthOperator.MAXIMAL:
        return shifted_maximal(f, n)
    if operator is GrowthOperator.SHARP_MAXIMAL:
        return sharp_shifted_maximal(f, n)
    return shifted_square(f, n)


def fit_growth(shifts: Sequence[int], norms: Sequence[float], p: float) -> Dict[str, object]:
    """Log model c0 + c1 log<n>, root model c0 + c1 (log<n>)^(1/p) and power exponent."""
    brackets = np.array([bracket(n) for n in shifts], dtype=float)
    y = np.asarray(norms, dtype=float)
    log_b = np.log(brackets).reshape(-1, 1)
    log_model = LinearRegression().fit(log_b, y)
    residual = float(np.sqrt(np.mean((log_model.predict(log_b) - y) ** 2)))
    root_x = log_b ** (1.0 / p)
    root_model = LinearRegression().fit(root_x, y)
    exponent = None
    if np.all(y > 0):
        exponent = float(LinearRegression().fit(log_b, np.log(y)).coef_[0])
    return {
        'fit': {'c0': float(log_model.intercept_), 'c1': float(log_model.coef_[0])},
        'residual': residual,
        'root_fit': {'c0': float(root_model.intercept_), 'c1': float(root_model.coef_[0])},
        'power_exponent': exponent,
    }


def measure_norm_growth(operator: Union[str, GrowthOperator], p: float, shifts: Sequence[int],
                        trials: int, seed: int, grid: Optional[Grid] = None) -> NormGrowthTable:
    """Largest ||Op^n f||_p / ||f||_p over seeded adversarial inputs: a lower bound on the norm."""
    operator = GrowthOperator(operator)
    if not (p > 1 and math.isfinite(p)):
        raise ValueError(f"Invalid exponent p={p}: must lie in (1, inf)")
    if trials < 1:
        raise ValueError(f"Invalid trials={trials}: must be at least 1")
    shifts = [int(n) for n in shifts]
    if any(b <= a for a, b in zip(shifts, shifts[1:])):
        raise ValueError(f"Invalid shifts {shifts}: must be strictly increasing")
    grid = make_grid(16.0, 1024) if grid is None else grid

    inputs = []
    for trial in range(trials):
        rng = np.random.default_rng(seed + trial)
        inputs.append(adversarial_input(grid, trial, rng))

    norms = []
    for n in shifts:
        best = 0.0
        for f in inputs:
            denominator = lp_norm(f, p)
            if denominator > 0:
                best = max(best, lp_norm(_apply(operator, f, n), p) / denominator)
        norms.append(best)
        logger.debug(f"{operator.value} n={n}: measured norm {best:.6g}")

    table = NormGrowthTable(operator=operator.value, p=float(p), shifts=shifts, norms=norms)
    if len(shifts) >= 2:
        fits = fit_growth(shifts, norms, p)
        table.fit = fits['fit']
        table.residual = fits['residual']
        table.root_fit = fits['root_fit']
        table.power_exponent = fits['power_exponent']
    return table
