"""Uniform grids, Fourier transforms, norms, dyadic intervals and Littlewood-Paley bumps."""
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Callable, List, Optional, Tuple

import numpy as np
from scipy import fft as sp_fft

logger = logging.getLogger(__name__)


class Side(str, Enum):
    SPACE = "space"
    FREQUENCY = "frequency"


class Direction(str, Enum):
    FORWARD = "forward"   # space -> frequency
    INVERSE = "inverse"   # frequency -> space


class BumpType(str, Enum):
    PHI = "phi"
    PSI = "psi"


def is_power_of_two(value: int) -> bool:
    return isinstance(value, (int, np.integer)) and value > 0 and (value & (value - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform grid x_j = -L + j*h on [-L, L) with N samples."""
    L: float
    N: int

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.N

    @property
    def frequency_spacing(self) -> float:
        return 1.0 / (2.0 * self.L)

    @property
    def nyquist(self) -> float:
        return self.N / (4.0 * self.L)

    def points(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    def frequencies(self) -> np.ndarray:
        """Lattice frequencies m/(2L) in FFT order."""
        return sp_fft.fftfreq(self.N, d=self.h)

    def frequency_indices(self) -> np.ndarray:
        """Integer lattice indices m in FFT order, in [-N/2, N/2)."""
        return np.rint(sp_fft.fftfreq(self.N) * self.N).astype(np.int64)

    def index_of(self, x: float) -> int:
        """Index of the cell [x_j, x_j + h) holding x."""
        return int(math.floor((x + self.L) / self.h))

    def contains(self, left: float, right: float) -> bool:
        return left >= -self.L and right <= self.L


def make_grid(L: float, N: int) -> Grid:
    """Build a grid on [-L, L) with N samples (N a power of two, N >= 8)."""
    if not isinstance(L, (int, float, np.floating)) or not L > 0:
        raise ValueError(f"Invalid half width L={L}: must be positive")
    if not is_power_of_two(N):
        raise ValueError(f"Invalid sample count N={N}: must be a power of two")
    if N < 8:
        raise ValueError(f"Invalid sample count N={N}: must be at least 8")
    return Grid(L=float(L), N=int(N))


@dataclass(frozen=True, eq=False)
class SampledFunction:
    grid: Grid
    values: np.ndarray
    side: Side = Side.SPACE

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.N,):
            raise ValueError(
                f"Invalid values: expected {self.grid.N} samples, got shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, 'values', values)
        object.__setattr__(self, 'side', Side(self.side))

    @classmethod
    def from_callable(cls, grid: Grid, func: Callable[[np.ndarray], np.ndarray],
                      side: Side = Side.SPACE) -> 'SampledFunction':
        """Sample func on the grid points (or lattice frequencies)."""
        nodes = grid.points() if Side(side) is Side.SPACE else grid.frequencies()
        return cls(grid, func(nodes), side)

    @classmethod
    def zeros(cls, grid: Grid, side: Side = Side.SPACE) -> 'SampledFunction':
        return cls(grid, np.zeros(grid.N), side)

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def cell(self) -> float:
        """Quadrature weight of one sample on this side."""
        return self.grid.h if self.side is Side.SPACE else self.grid.frequency_spacing

    def with_values(self, values: np.ndarray) -> 'SampledFunction':
        return SampledFunction(self.grid, values, self.side)

    def __add__(self, other: 'SampledFunction') -> 'SampledFunction':
        _check_compatible(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: 'SampledFunction') -> 'SampledFunction':
        _check_compatible(self, other)
        return self.with_values(self.values - other.values)

    def scaled(self, factor: complex) -> 'SampledFunction':
        return self.with_values(factor * self.values)


def _check_compatible(first: SampledFunction, second: SampledFunction) -> None:
    if first.grid != second.grid:
        raise ValueError(f"Grid mismatch: {first.grid} vs {second.grid}")
    if first.side is not second.side:
        raise ValueError(f"Side mismatch: {first.side.value} vs {second.side.value}")


def require_same_grid(*functions: SampledFunction) -> Grid:
    """Return the shared grid of space-side inputs or raise."""
    grid = functions[0].grid
    for func in functions:
        if func.grid != grid:
            raise ValueError(f"Grid mismatch: {func.grid} vs {grid}")
        if func.side is not Side.SPACE:
            raise ValueError(f"Side mismatch: expected space-side input, got {func.side.value}")
    return grid


def _phase(grid: Grid) -> np.ndarray:
    return np.exp(2j * np.pi * grid.L * grid.frequencies())


def dft(f: SampledFunction, direction: Direction = Direction.FORWARD) -> SampledFunction:
    """Unitary transform between space samples and lattice samples of the Fourier transform.

    Forward: f_hat(m/2L) = h * exp(2 pi i L xi) * sum_j f_j exp(-2 pi i j m / N),
    which matches the continuous transform of a function supported in [-L, L).
    Parseval holds between the Riemann L^2 norms of the two sides.
    """
    direction = Direction(direction)
    grid = f.grid
    if direction is Direction.FORWARD:
        if f.side is not Side.SPACE:
            raise ValueError("Side mismatch: forward transform expects a space-side function")
        values = grid.h * _phase(grid) * sp_fft.fft(f.values)
        return SampledFunction(grid, values, Side.FREQUENCY)
    if f.side is not Side.FREQUENCY:
        raise ValueError("Side mismatch: inverse transform expects a frequency-side function")
    values = sp_fft.ifft(f.values * np.conj(_phase(grid))) / grid.h
    return SampledFunction(grid, values, Side.SPACE)


def lp_norm(f: SampledFunction, p: float) -> float:
    """Riemann-sum L^p norm (h * sum |f|^p)^(1/p); max norm for p = inf."""
    if not p > 0:
        raise ValueError(f"Invalid exponent p={p}: must be positive")
    magnitudes = np.abs(f.values)
    if math.isinf(p):
        return float(magnitudes.max(initial=0.0))
    return float((f.cell * np.sum(magnitudes ** p)) ** (1.0 / p))


def inner_product(f: SampledFunction, g: SampledFunction) -> complex:
    """<f, g> = h * sum f * conj(g)."""
    _check_compatible(f, g)
    return complex(f.cell * np.vdot(g.values, f.values))


def bracket(n: int) -> int:
    """<n> = 2 + |n|."""
    return 2 + abs(int(n))


@dataclass(frozen=True, order=True)
class DyadicInterval:
    """[2^k n, 2^k (n+1)) with integer scale k and index n."""
    k: int
    index: int

    @property
    def length(self) -> float:
        return math.ldexp(1.0, self.k)

    @property
    def left(self) -> float:
        return math.ldexp(float(self.index), self.k)

    @property
    def right(self) -> float:
        return math.ldexp(float(self.index + 1), self.k)

    @property
    def center(self) -> float:
        return self.left + 0.5 * self.length

    def shift(self, n: int) -> 'DyadicInterval':
        """I_n: the translate sitting n lengths of I to the left."""
        return DyadicInterval(self.k, self.index - int(n))

    def parent(self) -> 'DyadicInterval':
        return DyadicInterval(self.k + 1, self.index // 2)

    def children(self) -> Tuple['DyadicInterval', 'DyadicInterval']:
        return DyadicInterval(self.k - 1, 2 * self.index), DyadicInterval(self.k - 1, 2 * self.index + 1)

    def contains_point(self, x: float) -> bool:
        return self.left <= x < self.right

    def contains(self, other: 'DyadicInterval') -> bool:
        return other.k <= self.k and (other.index >> (self.k - other.k)) == self.index

    def to_dict(self):
        return {'k': self.k, 'n_index': self.index}


def shift(interval: DyadicInterval, n: int) -> DyadicInterval:
    return interval.shift(n)


# Mother cutoff

def mother_bump(xi: np.ndarray) -> np.ndarray:
    """theta(xi) = exp(1 - 1/(1 - xi^2)) on |xi| < 1, zero outside."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros_like(xi)
    inside = np.abs(xi) < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - xi[inside] ** 2))
    return out


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step from 0 (t <= 0) to 1 (t >= 1) built from theta."""
    t = np.asarray(t, dtype=float)
    out = np.where(t >= 1.0, 1.0, 0.0)
    inside = (t > 0.0) & (t < 1.0)
    rising = mother_bump(1.0 - t[inside])
    falling = mother_bump(t[inside])
    out[inside] = rising / (rising + falling)
    return out


def mother_cutoff(xi: np.ndarray) -> np.ndarray:
    """chi: 1 on |xi| <= 1/2, 0 on |xi| >= 1."""
    return 1.0 - smooth_step(2.0 * np.abs(np.asarray(xi, dtype=float)) - 1.0)


def psi_hat(xi: np.ndarray, k: int) -> np.ndarray:
    """Psi_hat_k(xi) = chi(xi / 2^(k+1)) - chi(xi / 2^k), supported on 2^(k-1) <= |xi| <= 2^(k+1)."""
    xi = np.asarray(xi, dtype=float)
    return mother_cutoff(np.ldexp(xi, -(k + 1))) - mother_cutoff(np.ldexp(xi, -k))


def phi_hat(xi: np.ndarray, k: int) -> np.ndarray:
    """Phi_hat_k = sum_{j<k} Psi_hat_j = chi(xi / 2^k), supported on |xi| <= 2^k."""
    return mother_cutoff(np.ldexp(np.asarray(xi, dtype=float), -k))


@dataclass(frozen=True, eq=False)
class BumpFamily:
    """L^2-normalized bump of phi or psi type at frequency scale 2^k."""
    bump_type: BumpType
    k: int
    shift: int
    profile: SampledFunction
    fourier_support: Tuple[float, float]

    def window(self, xi: np.ndarray) -> np.ndarray:
        """Unnormalized Littlewood-Paley multiplier of this family."""
        if self.bump_type is BumpType.PSI:
            return psi_hat(xi, self.k)
        return phi_hat(xi, self.k)

    def companion(self) -> 'BumpFamily':
        """Low-pass companion Phi_hat_k of a psi family."""
        return make_bump_family(self.profile.grid, BumpType.PHI, self.k, self.shift)

    def measured_support(self, tolerance: float = 0.0) -> Tuple[float, float]:
        """Smallest and largest |xi| >= 0 where the profile is nonzero."""
        freqs = np.abs(self.profile.grid.frequencies())
        active = freqs[np.abs(self.profile.values) > tolerance]
        if active.size == 0:
            return 0.0, 0.0
        return float(active.min()), float(active.max())


def fourier_support(bump_type: BumpType, k: int) -> Tuple[float, float]:
    """omega_I: (-2^k, 2^k) for phi; the positive half (2^(k-1), 2^(k+1)) for psi (mirrored at -xi)."""
    if BumpType(bump_type) is BumpType.PSI:
        return math.ldexp(1.0, k - 1), math.ldexp(1.0, k + 1)
    return -math.ldexp(1.0, k), math.ldexp(1.0, k)


def check_scale(grid: Grid, k: int) -> None:
    """Reject frequency scales whose bumps are not resolved by the grid."""
    if math.ldexp(1.0, k + 1) > grid.nyquist:
        raise ValueError(f"Scale k={k} out of range: support exceeds Nyquist {grid.nyquist}")
    if math.ldexp(1.0, k) < grid.frequency_spacing:
        raise ValueError(
            f"Scale k={k} out of range: below frequency spacing {grid.frequency_spacing}"
        )


def make_bump_family(grid: Grid, bump_type: BumpType, k: int, shift_n: int = 0) -> BumpFamily:
    bump_type = BumpType(bump_type)
    check_scale(grid, k)
    freqs = grid.frequencies()
    raw = psi_hat(freqs, k) if bump_type is BumpType.PSI else phi_hat(freqs, k)
    norm = math.sqrt(grid.frequency_spacing * float(np.sum(raw ** 2)))
    if norm == 0.0:
        raise ValueError(f"Scale k={k} out of range: no lattice frequency inside the support")
    profile = SampledFunction(grid, raw / norm, Side.FREQUENCY)
    return BumpFamily(bump_type, k, int(shift_n), profile, fourier_support(bump_type, k))


def make_lp_family(k_min: int, k_max: int, grid: Grid) -> List[BumpFamily]:
    """Psi families for k_min..k_max; together they sum to 1 on 2^k_min <= |xi| <= 2^k_max."""
    if k_min > k_max:
        raise ValueError(f"Invalid scale range: k_min={k_min} > k_max={k_max}")
    families = [make_bump_family(grid, BumpType.PSI, k) for k in range(k_min, k_max + 1)]
    logger.debug(f"Built Littlewood-Paley family k={k_min}..{k_max} on N={grid.N}")
    return families


def partition_sum(families: List[BumpFamily], xi: np.ndarray) -> np.ndarray:
    """Sum of the unnormalized psi windows of a family at xi."""
    total = np.zeros_like(np.asarray(xi, dtype=float))
    for family in families:
        total = total + family.window(xi)
    return total


@lru_cache(maxsize=256)
def _packet_template(grid: Grid, bump_type: BumpType, k: int) -> np.ndarray:
    family = make_bump_family(grid, bump_type, k)
    return family.profile.values.copy()


def wave_packet(grid: Grid, bump_type: BumpType, interval: DyadicInterval,
                center: Optional[float] = None) -> SampledFunction:
    """Real L^2-normalized packet adapted to interval: frequency scale 1/|I|, centered on I."""
    k = -interval.k
    profile = _packet_template(grid, BumpType(bump_type), k)
    c = interval.center if center is None else center
    spectrum = profile * np.exp(-2j * np.pi * grid.frequencies() * c)
    packet = dft(SampledFunction(grid, spectrum, Side.FREQUENCY), Direction.INVERSE)
    return packet.with_values(packet.values.real)


# Orthonormal packets

def orthonormal_profile(t: np.ndarray) -> np.ndarray:
    """|Phi_hat| at unit scale: rises on 1/3 <= |t| <= 2/3, falls on 2/3 <= |t| <= 4/3.

    Squares of the dyadic dilates sum to 1 away from 0, and packets centered at the
    midpoints of the cells of one length are orthonormal.
    """
    t = np.abs(np.asarray(t, dtype=float))
    out = np.zeros_like(t)
    rising = (t > 1.0 / 3.0) & (t <= 2.0 / 3.0)
    falling = (t > 2.0 / 3.0) & (t < 4.0 / 3.0)
    out[rising] = np.sin(0.5 * np.pi * smooth_step(3.0 * t[rising] - 1.0))
    out[falling] = np.cos(0.5 * np.pi * smooth_step(1.5 * t[falling] - 1.0))
    return out


def frame_packet(grid: Grid, interval: DyadicInterval, center: Optional[float] = None) -> SampledFunction:
    """Real packet |I|^(1/2) profile(|I| xi) exp(-2 pi i xi c); the dyadic cells give an orthonormal system."""
    c = interval.center if center is None else center
    xi = grid.frequencies()
    if 4.0 / (3.0 * interval.length) > grid.nyquist:
        raise ValueError(f"Interval length {interval.length} too short for h={grid.h}")
    spectrum = math.sqrt(interval.length) * orthonormal_profile(interval.length * xi) * np.exp(-2j * np.pi * xi * c)
    packet = dft(SampledFunction(grid, spectrum, Side.FREQUENCY), Direction.INVERSE)
    return packet.with_values(packet.values.real)
