"""Bilinear multipliers, trilinear forms, the principal-value commutator and the discrete model operator."""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .grid import (BumpType, Direction, DyadicInterval, Grid, SampledFunction, Side, check_scale,
                   dft, inner_product, lp_norm, make_grid, require_same_grid, wave_packet)
from .symbols import SymbolDescriptor, c1_sgn, circular, double_commutator

logger = logging.getLogger(__name__)

LATTICE_CHUNK = 256
EPSILON_TOLERANCE = 1e-9
DEFAULT_PADDING = 8


def _spectrum(f: SampledFunction) -> np.ndarray:
    return dft(f, Direction.FORWARD).values


def _from_spectrum(grid: Grid, values: np.ndarray) -> SampledFunction:
    return dft(SampledFunction(grid, values, Side.FREQUENCY), Direction.INVERSE)


def _lattice_blocks(grid: Grid, chunk: int = LATTICE_CHUNK):
    """Yield (positions, row indices, column indices) over the N x N frequency lattice."""
    idx = grid.frequency_indices()
    for start in range(0, grid.N, chunk):
        stop = min(start + chunk, grid.N)
        yield slice(start, stop), idx[start:stop, None], idx[None, :]


def apply_multiplier(m: SymbolDescriptor, f: SampledFunction, g: SampledFunction) -> SampledFunction:
    """T_m(f, g)(x) as the double frequency sum of m(xi1, xi2) f_hat(xi1) g_hat(xi2) e^{2 pi i x (xi1 + xi2)}.

    Direct O(N^2) evaluation on the lattice; output frequencies wrap modulo N.
    """
    grid = require_same_grid(f, g)
    N = grid.N
    F = _spectrum(f)
    G = _spectrum(g)
    real_part = np.zeros(N)
    imag_part = np.zeros(N)
    for rows, m1, m2 in _lattice_blocks(grid):
        block = m.evaluate_lattice(m1, m2, N) * F[rows, None] * G[None, :]
        target = np.mod(m1 + m2, N).ravel()
        real_part += np.bincount(target, weights=block.real.ravel(), minlength=N)
        imag_part += np.bincount(target, weights=block.imag.ravel(), minlength=N)
    return _from_spectrum(grid, grid.frequency_spacing * (real_part + 1j * imag_part))


def trilinear_form(m: SymbolDescriptor, f: SampledFunction, g: SampledFunction,
                   h: SampledFunction) -> complex:
    """Lambda(f, g, h) = integral of T_m(f, g) h, summed directly on the frequency lattice."""
    grid = require_same_grid(f, g, h)
    N = grid.N
    F = _spectrum(f)
    G = _spectrum(g)
    H = _spectrum(h)
    total = 0j
    for rows, m1, m2 in _lattice_blocks(grid):
        block = m.evaluate_lattice(m1, m2, N) * F[rows, None] * G[None, :]
        total += complex(np.sum(block * H[np.mod(-(m1 + m2), N)]))
    return grid.frequency_spacing ** 2 * total


def trilinear_scale(f: SampledFunction, g: SampledFunction, h: SampledFunction) -> float:
    """Size of the inputs in the lattice sum: dxi^2 ||F||_1 ||G||_1 ||H||_inf for symbols bounded by 1."""
    grid = require_same_grid(f, g, h)
    F, G, H = _spectrum(f), _spectrum(g), _spectrum(h)
    return float(grid.frequency_spacing ** 2 * np.sum(np.abs(F)) * np.sum(np.abs(G)) * np.max(np.abs(H)))


def pairing(f: SampledFunction, g: SampledFunction) -> complex:
    """Bilinear (unconjugated) integral of f * g on the grid."""
    grid = require_same_grid(f, g)
    return complex(grid.h * np.sum(f.values * g.values))


@dataclass(frozen=True)
class TruncationParams:
    """Inner truncation epsilon (defaults to the grid spacing) and its implied outer cutoff 1/epsilon."""
    epsilon: Optional[float] = None

    def resolve(self, grid: Grid) -> float:
        epsilon = grid.h if self.epsilon is None else float(self.epsilon)
        if not epsilon > 0:
            raise ValueError(f"Invalid epsilon={epsilon}: must be positive")
        if epsilon < grid.h * (1.0 - EPSILON_TOLERANCE):
            raise ValueError(f"Invalid epsilon={epsilon}: below grid spacing h={grid.h}")
        return epsilon

    def outer_cutoff(self, grid: Grid) -> Tuple[float, bool]:
        """min(1/epsilon, 2L) and whether clamping happened."""
        epsilon = self.resolve(grid)
        outer = 1.0 / epsilon
        if outer > 2.0 * grid.L:
            return 2.0 * grid.L, True
        return outer, False


def antiderivative(a: SampledFunction) -> np.ndarray:
    """A(x_j) - A(x_0) by the cumulative trapezoid rule."""
    return cumulative_trapezoid(a.values, dx=a.grid.h, initial=0)


def c1_pv_oracle(f: SampledFunction, a: SampledFunction,
                 trunc: Optional[TruncationParams] = None) -> SampledFunction:
    """Space-side truncated commutator.

    -sum over epsilon <= |t| <= cutoff of (A(x+t) - A(x))/t * f(x+t)/t * h on the
    symmetric node set t = j*h. f vanishes outside the grid.
    """
    grid = require_same_grid(f, a)
    trunc = TruncationParams() if trunc is None else trunc
    epsilon = trunc.resolve(grid)
    outer, clamped = trunc.outer_cutoff(grid)
    if clamped:
        logger.warning(f"Outer cutoff 1/epsilon={1.0 / epsilon:g} exceeds the domain; clamped to {outer:g}")

    h = grid.h
    N = grid.N
    j_min = max(1, int(math.ceil(epsilon / h - EPSILON_TOLERANCE)))
    j_max = min(N - 1, int(math.floor(outer / h + EPSILON_TOLERANCE)))
    A = antiderivative(a)
    values = f.values
    out = np.zeros(N, dtype=complex)
    for j in range(j_min, j_max + 1):
        weight = 1.0 / (j * h) ** 2
        rise = A[j:] - A[:N - j]
        out[:N - j] += rise * values[j:] * weight
        out[j:] -= rise * values[:N - j] * weight
    return SampledFunction(grid, -h * out)


def commutator_via_multiplier(f: SampledFunction, a: SampledFunction) -> SampledFunction:
    """-i*pi*T_{c1}(f, a), the normalization under which the truncated kernel agrees with the symbol."""
    return apply_multiplier(c1_sgn(), f, a).scaled(-1j * math.pi)


def spectral_hilbert(f: SampledFunction, padding: int = DEFAULT_PADDING) -> SampledFunction:
    """Hilbert transform (multiplier -i sgn(xi)) of f extended by zero to a padded grid."""
    if padding < 1 or not isinstance(padding, int):
        raise ValueError(f"Invalid padding={padding}: must be a positive integer")
    grid = f.grid
    padded = make_grid(grid.L * padding, grid.N * padding)
    offset = grid.N * (padding - 1) // 2
    values = np.zeros(padded.N, dtype=complex)
    values[offset:offset + grid.N] = f.values
    spectrum = _spectrum(SampledFunction(padded, values)) * (-1j * np.sign(padded.frequencies()))
    result = _from_spectrum(padded, spectrum)
    return SampledFunction(grid, result.values[offset:offset + grid.N])


def _abs_derivative(u: SampledFunction) -> SampledFunction:
    """|D| u with symbol 2 pi |xi|."""
    spectrum = _spectrum(u) * (2.0 * np.pi * np.abs(u.grid.frequencies()))
    return _from_spectrum(u.grid, spectrum)


def spectral_derivative(u: SampledFunction, order: int = 1) -> SampledFunction:
    spectrum = _spectrum(u) * (2j * np.pi * u.grid.frequencies()) ** order
    return _from_spectrum(u.grid, spectrum)


def _times(u: SampledFunction, v: SampledFunction) -> SampledFunction:
    return u.with_values(u.values * v.values)


def abs_derivative_commutator(f: SampledFunction, A: SampledFunction) -> SampledFunction:
    """pi * [|D|, A] f; equals -i*pi*T_{c1}(f, A')."""
    require_same_grid(f, A)
    commutator = _abs_derivative(_times(A, f)) - _times(A, _abs_derivative(f))
    return commutator.scaled(math.pi)


def nested_abs_derivative_commutator(f: SampledFunction, A: SampledFunction) -> SampledFunction:
    """[|D|, [|D|, A]] f; equals -T_{double_commutator}(f, A'')."""
    require_same_grid(f, A)

    def inner(u: SampledFunction) -> SampledFunction:
        return _abs_derivative(_times(A, u)) - _times(A, _abs_derivative(u))

    return _abs_derivative(inner(f)) - inner(_abs_derivative(f))


def circular_commutator(A: SampledFunction, B: SampledFunction) -> SampledFunction:
    """|D|^2(AB) - |D|(B |D|A) - |D|(A |D|B) + (|D|A)(|D|B); equals -T_{circular(1,1)}(A', B')."""
    require_same_grid(A, B)
    DA = _abs_derivative(A)
    DB = _abs_derivative(B)
    return (_abs_derivative(_abs_derivative(_times(A, B)))
            - _abs_derivative(_times(B, DA))
            - _abs_derivative(_times(A, DB))
            + _times(DA, DB))


def symbol_identities(f: SampledFunction, A: SampledFunction, B: SampledFunction) -> Dict[str, float]:
    """Relative L2 gaps between the spectral commutators and their multiplier forms."""
    a = spectral_derivative(A)
    a2 = spectral_derivative(A, 2)
    b = spectral_derivative(B)
    return {
        'abs_derivative_commutator': relative_l2_error(
            abs_derivative_commutator(f, A), apply_multiplier(c1_sgn(), f, a).scaled(-1j * math.pi)),
        'nested_commutator': relative_l2_error(
            nested_abs_derivative_commutator(f, A), apply_multiplier(double_commutator(), f, a2).scaled(-1.0)),
        'circular_commutator': relative_l2_error(
            circular_commutator(A, B), apply_multiplier(circular(1.0, 1.0), a, b).scaled(-1.0)),
    }


def relative_l2_error(reference: SampledFunction, candidate: SampledFunction) -> float:
    norm = lp_norm(reference, 2)
    gap = lp_norm(candidate - reference, 2)
    if norm == 0.0:
        return gap
    return gap / norm


def comparison_report(op: str, reference: SampledFunction, candidate: SampledFunction,
                      epsilon: Optional[float] = None) -> Dict[str, object]:
    grid = reference.grid
    return {
        'op': op,
        'grid': {'L': grid.L, 'N': grid.N},
        'epsilon': epsilon,
        'rel_l2_error': relative_l2_error(reference, candidate),
        'linf_error': lp_norm(candidate - reference, math.inf),
    }


# Discrete model operator

@dataclass(frozen=True)
class ModelOperatorSpec:
    """Finite collection of dyadic intervals with shifts n1, n2 and the bump types of the three slots."""
    intervals: Tuple[DyadicInterval, ...]
    n1: int = 0
    n2: int = 0
    types: Tuple[BumpType, BumpType, BumpType] = (BumpType.PHI, BumpType.PSI, BumpType.PSI)

    def __post_init__(self):
        intervals = tuple(self.intervals)
        types = tuple(BumpType(t) for t in self.types)
        if len(types) != 3:
            raise ValueError(f"Invalid bump types {types}: need exactly three")
        if len(set(intervals)) != len(intervals):
            raise ValueError("Invalid interval collection: duplicates present")
        object.__setattr__(self, 'intervals', intervals)
        object.__setattr__(self, 'types', types)
        if self.psi_count < 2:
            raise ValueError(f"Invalid bump types {[t.value for t in types]}: at least two must be psi")

    @property
    def psi_count(self) -> int:
        return sum(1 for t in self.types if t is BumpType.PSI)

    def validate_on(self, grid: Grid) -> None:
        for interval in self.intervals:
            check_scale(grid, -interval.k)
            for shifted in (interval, interval.shift(self.n1), interval.shift(self.n2)):
                if not grid.contains(shifted.left, shifted.right):
                    raise ValueError(f"Interval {shifted} out of domain [-{grid.L}, {grid.L})")


@dataclass
class ModelCoefficients:
    """Per-interval inner products of the model operator."""
    intervals: List[DyadicInterval] = field(default_factory=list)
    first: List[complex] = field(default_factory=list)
    second: List[complex] = field(default_factory=list)


def _model_coefficients(spec: ModelOperatorSpec, f: SampledFunction,
                        g: SampledFunction) -> ModelCoefficients:
    grid = require_same_grid(f, g)
    spec.validate_on(grid)
    coeffs = ModelCoefficients()
    for interval in spec.intervals:
        phi1 = wave_packet(grid, spec.types[0], interval.shift(spec.n1))
        phi2 = wave_packet(grid, spec.types[1], interval.shift(spec.n2))
        coeffs.intervals.append(interval)
        coeffs.first.append(inner_product(f, phi1))
        coeffs.second.append(inner_product(g, phi2))
    return coeffs


def apply_model_operator(spec: ModelOperatorSpec, f: SampledFunction,
                         g: SampledFunction) -> SampledFunction:
    """sum over I of |I|^{-1/2} <f, Phi1_{I_n1}> <g, Phi2_{I_n2}> Phi3_I."""
    grid = require_same_grid(f, g)
    coeffs = _model_coefficients(spec, f, g)
    out = np.zeros(grid.N, dtype=complex)
    for interval, c1, c2 in zip(coeffs.intervals, coeffs.first, coeffs.second):
        phi3 = wave_packet(grid, spec.types[2], interval)
        out += (c1 * c2 / math.sqrt(interval.length)) * phi3.values
    return SampledFunction(grid, out)


def model_trilinear_sum(spec: ModelOperatorSpec, f: SampledFunction, g: SampledFunction,
                        h: SampledFunction) -> complex:
    """sum over I of |I|^{-1/2} <f, Phi1> <g, Phi2> <Phi3, h>; equals <T(f, g), h>."""
    grid = require_same_grid(f, g, h)
    coeffs = _model_coefficients(spec, f, g)
    total = 0j
    for interval, c1, c2 in zip(coeffs.intervals, coeffs.first, coeffs.second):
        phi3 = wave_packet(grid, spec.types[2], interval)
        total += c1 * c2 * inner_product(phi3, h) / math.sqrt(interval.length)
    return total


def model_collection(lengths_log2: Sequence[int], left: float, count: int) -> Tuple[DyadicInterval, ...]:
    """count consecutive dyadic intervals per scale, starting at the first cell at or right of left."""
    intervals = []
    for k in lengths_log2:
        start = int(math.ceil(math.ldexp(left, -k)))
        intervals.extend(DyadicInterval(int(k), start + i) for i in range(count))
    return tuple(intervals)


def model_growth_ratio(spec: ModelOperatorSpec, f: SampledFunction, g: SampledFunction) -> float:
    """||T(f, g)||_1 / (||f||_2 ||g||_2)."""
    denominator = lp_norm(f, 2) * lp_norm(g, 2)
    if denominator == 0.0:
        return 0.0
    return lp_norm(apply_model_operator(spec, f, g), 1) / denominator
