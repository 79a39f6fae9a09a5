"""Whitney-localized pieces of a symbol and their double Fourier coefficients."""
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from scipy import fft as sp_fft
from sklearn.linear_model import LinearRegression

from .grid import bracket, is_power_of_two, phi_hat, psi_hat
from .symbols import SymbolDescriptor, SymbolKind, c1_indicator

logger = logging.getLogger(__name__)

PERIOD_FACTOR = 8           # period box [-4 * 2^k, 4 * 2^k) per axis
DECAY_ORDER = 4             # the fixed large integer in the decay bounds
ALIASING_THRESHOLD = 1e-8
OVERSAMPLING = 8
FIT_START = 8
ROW_CHUNK = 256
SYNTHESIS_POINTS = 100
SYNTHESIS_ENVELOPE = 1.28  # kinked bases converge like 1/n_max: error <= 1e-2 at n_max = 128

SUPPORTED_BASES = (
    SymbolKind.C1_SGN,
    SymbolKind.C1_INDICATOR,
    SymbolKind.GEN22,
    SymbolKind.DOUBLE_COMMUTATOR,
    SymbolKind.CONSTANT,
)


class Part(str, Enum):
    LOW_HIGH = "low_high"
    HIGH_LOW = "high_low"
    HIGH_HIGH = "high_high"

    @classmethod
    def parse(cls, value: Union[str, 'Part']) -> 'Part':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).replace('-', '_'))
        except ValueError:
            raise ValueError(f"Invalid part: {value}")


class DecayShape(str, Enum):
    PLAIN = "plain"
    TILDE = "tilde"


@dataclass(frozen=True)
class WindowedSymbol:
    part: Part
    k: int
    base_symbol: SymbolDescriptor

    @property
    def period(self) -> float:
        return PERIOD_FACTOR * math.ldexp(1.0, self.k)

    @property
    def classical(self) -> bool:
        """high_low is a classical paraproduct piece; it is kept out of decay experiments."""
        return self.part is Part.HIGH_LOW

    def window_factors(self, xi: np.ndarray, xi1: np.ndarray):
        """The two one-variable factors of the window."""
        k = self.k
        if self.part is Part.LOW_HIGH:
            return phi_hat(xi, k - 1), psi_hat(xi1, k)
        if self.part is Part.HIGH_LOW:
            return psi_hat(xi, k), phi_hat(xi1, k - 1)
        return psi_hat(xi, k), psi_hat(xi1, k)

    def window(self, xi, xi1) -> np.ndarray:
        xi, xi1 = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(xi1, dtype=float))
        first, second = self.window_factors(xi, xi1)
        return first * second

    def __call__(self, xi, xi1) -> np.ndarray:
        xi, xi1 = np.broadcast_arrays(np.asarray(xi, dtype=float), np.asarray(xi1, dtype=float))
        return np.asarray(self.base_symbol.evaluate(xi, xi1)) * self.window(xi, xi1)

    def sample_points(self, resolution: int) -> np.ndarray:
        """xi_i = P * (-1/2 + i/R); exact dyadic rescaling across k."""
        return np.ldexp(PERIOD_FACTOR * (-0.5 + np.arange(resolution) / resolution), self.k)


def build_windowed_symbol(part: Union[str, Part], k: int,
                          base: Optional[SymbolDescriptor] = None) -> WindowedSymbol:
    part = Part.parse(part)
    base = c1_indicator() if base is None else base
    if base.kind not in SUPPORTED_BASES or base.adjoints:
        raise ValueError(f"Unsupported base symbol for Whitney windows: {base.formula}")
    if not isinstance(k, (int, np.integer)) or abs(k) > 500:
        raise ValueError(f"Scale k={k} out of range")
    return WindowedSymbol(part=part, k=int(k), base_symbol=base)


@dataclass
class DecayReport:
    part: str
    k: int
    n_max: int
    resolution: int
    C_quad: float
    exp_n: Optional[float]
    exp_n1: Optional[float]
    shape: str = DecayShape.PLAIN.value

    def to_dict(self) -> Dict[str, object]:
        return {
            'part': self.part,
            'k': self.k,
            'n_max': self.n_max,
            'resolution': self.resolution,
            'C_quad': self.C_quad,
            'exp_n': self.exp_n,
            'exp_n1': self.exp_n1,
        }


@dataclass
class CoeffTable:
    """Coefficients C[n + n_max, n1 + n_max] on the square |n|, |n1| <= n_max."""
    part: Part
    k: int
    n_max: int
    resolution: int
    values: np.ndarray
    aliasing: bool = False
    decay_fit: Optional[DecayReport] = field(default=None)

    def coefficient(self, n: int, n1: int) -> complex:
        if abs(n) > self.n_max or abs(n1) > self.n_max:
            raise KeyError(f"Index ({n}, {n1}) outside |n| <= {self.n_max}")
        return complex(self.values[n + self.n_max, n1 + self.n_max])

    def indices(self) -> np.ndarray:
        return np.arange(-self.n_max, self.n_max + 1)

    def to_frame(self) -> pd.DataFrame:
        idx = self.indices()
        n, n1 = np.meshgrid(idx, idx, indexing='ij')
        flat = self.values.ravel()
        return pd.DataFrame({
            'part': self.part.value,
            'k': self.k,
            'n': n.ravel(),
            'n1': n1.ravel(),
            're': flat.real,
            'im': flat.imag,
            'abs': np.abs(flat),
        })


def _row_transforms(ws: WindowedSymbol, resolution: int, columns: np.ndarray) -> np.ndarray:
    """FFT of each sample row along xi1, kept only at the requested column frequencies.

    Rows are sampled in chunks; rows where the xi window vanishes stay zero.
    """
    nodes = ws.sample_points(resolution)
    first, second = ws.window_factors(nodes, nodes)
    out = np.zeros((resolution, columns.size), dtype=complex)
    rows = np.flatnonzero(first)
    cols = np.flatnonzero(second)
    if rows.size == 0 or cols.size == 0:
        return out
    col_nodes = nodes[cols][None, :]
    for start in range(0, rows.size, ROW_CHUNK):
        chunk = rows[start:start + ROW_CHUNK]
        block = np.zeros((chunk.size, resolution), dtype=float if ws.base_symbol.is_real else complex)
        base = np.asarray(ws.base_symbol.evaluate(nodes[chunk][:, None], col_nodes))
        block[:, cols] = base * first[chunk][:, None] * second[cols][None, :]
        out[chunk] = sp_fft.fft(block, axis=1)[:, columns]
    return out


def compute_coeffs(ws: WindowedSymbol, n_max: int, resolution: int) -> CoeffTable:
    """Double Fourier coefficients of the windowed symbol over its period box.

    C[n, n1] = P^-2 * integral of W(xi, xi1) exp(-2 pi i (n xi + n1 xi1) / P),
    computed by a 2D FFT of R x R samples restricted to |n|, |n1| <= n_max.
    """
    if not isinstance(n_max, (int, np.integer)) or n_max < 1:
        raise ValueError(f"Invalid n_max={n_max}: must be a positive integer")
    if not is_power_of_two(resolution):
        raise ValueError(f"Invalid resolution={resolution}: must be a power of two")
    if resolution < OVERSAMPLING * n_max:
        raise ValueError(
            f"Insufficient resolution={resolution}: need at least {OVERSAMPLING * n_max} for n_max={n_max}"
        )

    idx = np.arange(-n_max, n_max + 1)
    lattice = idx % resolution
    partial = _row_transforms(ws, resolution, lattice)
    spectrum = sp_fft.fft(partial, axis=0)[lattice, :] / float(resolution) ** 2
    # samples start at -P/2, which contributes (-1)^(n + n1)
    signs = np.where(idx % 2 == 0, 1.0, -1.0)
    values = spectrum * np.outer(signs, signs)

    edge = np.concatenate([values[0, :], values[-1, :], values[:, 0], values[:, -1]])
    aliasing = bool(np.max(np.abs(edge)) > ALIASING_THRESHOLD)
    if aliasing:
        logger.warning(
            f"Coefficients at |n| = {n_max} exceed {ALIASING_THRESHOLD:g} "
            f"for part={ws.part.value}, k={ws.k}; table may be truncated"
        )
    logger.debug(f"Computed {values.shape} coefficient table for {ws.part.value}, k={ws.k}, R={resolution}")
    return CoeffTable(part=ws.part, k=ws.k, n_max=int(n_max), resolution=int(resolution),
                      values=values, aliasing=aliasing)


def decay_bound(n: np.ndarray, n1: np.ndarray, shape: Union[str, DecayShape]) -> np.ndarray:
    """<n>^-2 <n1>^-4, or <n>^-2 <n - n1>^-4 + <n>^-4 <n1>^-4 for the tilde shape."""
    shape = DecayShape(shape)
    bn = 2.0 + np.abs(n)
    bn1 = 2.0 + np.abs(n1)
    if shape is DecayShape.PLAIN:
        return bn ** -2 * bn1 ** -DECAY_ORDER
    return bn ** -2 * (2.0 + np.abs(n - n1)) ** -DECAY_ORDER + bn ** -DECAY_ORDER * bn1 ** -DECAY_ORDER


def _fit_exponent(indices: np.ndarray, magnitudes: np.ndarray, start: int) -> Optional[float]:
    usable = (np.abs(indices) >= start) & (magnitudes > 0)
    if np.count_nonzero(usable) < 2:
        return None
    x = np.log(2.0 + np.abs(indices[usable])).reshape(-1, 1)
    y = np.log(magnitudes[usable])
    model = LinearRegression().fit(x, y)
    return float(model.coef_[0])


def verify_decay(table: CoeffTable, which: Union[str, DecayShape] = DecayShape.PLAIN) -> DecayReport:
    """Constant C_quad = max |C| / bound and log-log decay exponents along both axes."""
    shape = DecayShape(which)
    idx = table.indices()
    n, n1 = np.meshgrid(idx, idx, indexing='ij')
    magnitudes = np.abs(table.values)
    c_quad = float(np.max(magnitudes / decay_bound(n, n1, shape)))
    centre = table.n_max
    exp_n = _fit_exponent(idx, magnitudes[:, centre], FIT_START)
    exp_n1 = _fit_exponent(idx, magnitudes[centre, :], FIT_START)
    report = DecayReport(part=table.part.value, k=table.k, n_max=table.n_max,
                         resolution=table.resolution, C_quad=c_quad,
                         exp_n=exp_n, exp_n1=exp_n1, shape=shape.value)
    table.decay_fit = report
    logger.info(f"Decay report {table.part.value} k={table.k}: C_quad={c_quad:.4g}, exp_n={exp_n}, exp_n1={exp_n1}")
    return report


def off_band_ratio(table: CoeffTable, c_quad: float, band: int = 4, start: int = FIT_START) -> float:
    """max |C| / (C_quad <n>^-4 <n1>^-4) away from the diagonal band |n - n1| <= band."""
    idx = table.indices()
    n, n1 = np.meshgrid(idx, idx, indexing='ij')
    mask = (np.abs(n - n1) > band) & (np.minimum(2 + np.abs(n), 2 + np.abs(n1)) >= start)
    if not np.any(mask) or c_quad == 0:
        return 0.0
    envelope = c_quad * (2.0 + np.abs(n[mask])) ** -DECAY_ORDER * (2.0 + np.abs(n1[mask])) ** -DECAY_ORDER
    return float(np.max(np.abs(table.values[mask]) / envelope))


def band_envelope(table: CoeffTable, band: int = 2) -> pd.DataFrame:
    """For each n, the largest |C| on the band |n - n1| <= band, with the <n>^-2 envelope."""
    idx = table.indices()
    rows = []
    for n in idx:
        lo, hi = max(-table.n_max, n - band), min(table.n_max, n + band)
        segment = table.values[n + table.n_max, lo + table.n_max:hi + table.n_max + 1]
        rows.append({'n': int(n), 'band_max': float(np.max(np.abs(segment))),
                     'envelope': float(bracket(n)) ** -2})
    return pd.DataFrame(rows)


def synthesize(table: CoeffTable, xi, xi1) -> np.ndarray:
    """Resum the truncated double Fourier series at (xi, xi1)."""
    period = PERIOD_FACTOR * math.ldexp(1.0, table.k)
    idx = table.indices()
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xi1 = np.atleast_1d(np.asarray(xi1, dtype=float))
    ex = np.exp(2j * np.pi * np.outer(xi, idx) / period)
    ey = np.exp(2j * np.pi * np.outer(xi1, idx) / period)
    return np.einsum('pi,ij,pj->p', ex, table.values, ey)


def support_points(ws: WindowedSymbol, count: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """count points (xi, xi1) drawn uniformly from where the window is nonzero."""
    reach = math.ldexp(2.0, ws.k)
    xs: List[np.ndarray] = []
    ys: List[np.ndarray] = []
    found = 0
    while found < count:
        xi, xi1 = rng.uniform(-reach, reach, size=(2, 4 * count))
        keep = ws.window(xi, xi1) > 0.0
        xs.append(xi[keep])
        ys.append(xi1[keep])
        found += int(np.count_nonzero(keep))
    return np.concatenate(xs)[:count], np.concatenate(ys)[:count]


def synthesis_tolerance(n_max: int) -> float:
    return SYNTHESIS_ENVELOPE / n_max


def synthesis_error(table: CoeffTable, ws: WindowedSymbol, count: int = SYNTHESIS_POINTS, seed: int = 0) -> float:
    """Max |synthesize - windowed symbol| over count random points of the window support."""
    if table.k != ws.k or table.part is not ws.part:
        raise ValueError(f"Table ({table.part.value}, k={table.k}) does not belong to {ws.part.value}, k={ws.k}")
    xi, xi1 = support_points(ws, count, np.random.default_rng(seed))
    error = float(np.max(np.abs(synthesize(table, xi, xi1) - ws(xi, xi1))))
    logger.debug(f"Synthesis error {error:.3g} at n_max={table.n_max} over {count} points")
    return error


def default_resolution(n_max: int, minimum: int = 64) -> int:
    return max(minimum, 1 << int(math.ceil(math.log2(OVERSAMPLING * n_max))))


def verify_scale_uniformity(base: Optional[SymbolDescriptor], part: Union[str, Part],
                            k_list: Iterable[int], n_max: int,
                            resolution: Optional[int] = None) -> float:
    """max over k in k_list of |C^k - C^0| elementwise."""
    k_list = [int(k) for k in k_list]
    resolution = default_resolution(n_max) if resolution is None else resolution
    reference = compute_coeffs(build_windowed_symbol(part, 0, base), n_max, resolution)
    deviation = 0.0
    for k in k_list:
        if k == 0:
            continue
        table = compute_coeffs(build_windowed_symbol(part, k, base), n_max, resolution)
        deviation = max(deviation, float(np.max(np.abs(table.values - reference.values))))
    logger.info(f"Scale uniformity over k={k_list}: max deviation {deviation:.3g}")
    return deviation
