"""Verification experiments: each composes the numerical modules, writes its tables and
records pass/fail assertions in a run manifest."""
import logging
import math
import time
import uuid
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from . import __version__
from .config import ExperimentConfig, validate_config
from .export import emit_plot_data, function_frame, heatmap_axis, heatmap_columns, symbol_heatmap, write_json, \
    write_outputs
from .grid import BumpType, SampledFunction, bracket, inner_product, lp_norm, make_grid, wave_packet
from .monitoring.core import ensure_initialized, monitoring_system
from .monitoring.decorators import monitor_all
from .monitoring.event_bus import (ASSERTION_CHECKED, EXPERIMENT_COMPLETED, EXPERIMENT_FAILED, EXPERIMENT_STARTED,
                                   event_bus)
from .monitoring.models import AssertionResult, RunManifest, check
from .operators import (ModelOperatorSpec, TruncationParams, apply_model_operator, apply_multiplier, c1_pv_oracle,
                        commutator_via_multiplier, comparison_report, model_collection, model_growth_ratio,
                        model_trilinear_sum, pairing, relative_l2_error, spectral_hilbert, symbol_identities,
                        trilinear_form, trilinear_scale)
from .shifted import (CZ_FAMILIES, adversarial_input, covering_bound, covering_ratio, cz_decompose, cz_input,
                      fit_growth, measure_norm_growth, neighbour_domination_gap, require_dyadic_domain,
                      sharp_shifted_maximal, shifted_maximal, shifted_square, sparse_steps,
                      square_coefficient_energy, verify_cz)
from .symbols import (FrequencyPoint, SymbolDescriptor, SymbolKind, adjoint_symbol, c1_indicator, circular,
                      constant, eval_c1, gen22_product, make_symbol, primitive_second_differences,
                      quadrature_oracle, symbol_at)
from .whitney import (DecayShape, Part, band_envelope, build_windowed_symbol, compute_coeffs, off_band_ratio,
                      synthesis_error, synthesis_tolerance, verify_decay, verify_scale_uniformity)

logger = logging.getLogger(__name__)

# symbol_check
POINT_RANGE = 100.0
HOMOGENEITY_FACTORS = (0.25, 2.0, 8.0)
PRIMITIVE_STEP = 1e-3
JUMP_POINTS = (1.0, 3.5, 10.0)

# operator_compare
SUPPLEMENT_GRID = (8.0, 256)

# duality_check
DUALITY_TRIPLES = 100
DUALITY_MAX_N = 256

# model_growth
MODEL_INTERVALS = 8
MODEL_MAX_TRIALS = 32

# shifted_norms
SHIFTED_MAX_N = 1024
COVERING_FUNCTIONS = 2
COVERING_MAX_SHIFT = 64
COVERING_LEVEL = 0.25
IDENTITY_TRIALS = 30

# cz_audit
CZ_INSTANCES = 1000
CZ_MAX_N = 256

SCALE_UNIFORMITY_KS = (-2, 0, 3)


def _oracle_tolerance(nodes: int) -> float:
    """Midpoint counting is off by at most 1/M per factor."""
    return max(1e-5, 4.0 / nodes)


class RunContext:
    """Collects assertions, artifacts and summary values of one run."""

    def __init__(self, config: ExperimentConfig, run_id: str):
        self.config = config
        self.run_id = run_id
        self.out_dir = Path(config.out)
        self.assertions: List[AssertionResult] = []
        self.artifacts: List[str] = []
        self.summary: Dict[str, Any] = {}

    def record(self, result: AssertionResult) -> AssertionResult:
        self.assertions.append(result)
        log = logger.info if result.passed else logger.warning
        log(f"[{self.run_id}] {result.name}: {'pass' if result.passed else 'FAIL'} "
            f"(value={result.value}, threshold={result.threshold}) {result.detail}".rstrip())
        event_bus.publish(ASSERTION_CHECKED, {'run_id': self.run_id, **result.to_dict()})
        return result

    def check(self, name: str, value: Optional[float], threshold: float, upper: bool = True,
              detail: str = "") -> AssertionResult:
        if value is None:
            return self.record(AssertionResult(name=name, passed=False, threshold=float(threshold),
                                               detail=detail or "no value"))
        return self.record(check(name, value, threshold, upper, detail))

    def require(self, name: str, condition: bool, detail: str = "") -> AssertionResult:
        return self.record(AssertionResult(name=name, passed=bool(condition), detail=detail))

    def write(self, stem: str, frame: Optional[pd.DataFrame] = None, report: Optional[Dict[str, Any]] = None,
              sort_by: Sequence[str] = ()) -> None:
        self.artifacts.extend(write_outputs(self.out_dir / stem, self.config.format, frame, report, sort_by))

    def plot(self, stem: str, table: Any, sort_by: Sequence[str] = ()) -> None:
        self.artifacts.append(str(emit_plot_data(table, self.out_dir / f"{stem}.csv", sort_by)))


def _symbol(config: ExperimentConfig) -> SymbolDescriptor:
    return make_symbol(config.kind, config.a, config.b)


def _frequency_point(descriptor: SymbolDescriptor, first: float, second: float) -> FrequencyPoint:
    if descriptor.kind is SymbolKind.CIRCULAR:
        return FrequencyPoint(0.0, float(first), float(second))
    return FrequencyPoint(float(first), float(second))


# Symbols

@monitor_all
def symbol_check(config: ExperimentConfig, ctx: RunContext) -> None:
    descriptor = _symbol(config)
    rng = np.random.default_rng(config.seed)
    first = rng.uniform(-POINT_RANGE, POINT_RANGE, config.points)
    second = rng.uniform(-POINT_RANGE, POINT_RANGE, config.points)

    closed = np.asarray(descriptor.evaluate(first, second), dtype=float)
    oracle = np.array([quadrature_oracle(descriptor, _frequency_point(descriptor, x, y), config.nodes)
                       for x, y in zip(first, second)])
    gap = np.abs(closed - oracle)
    tolerance = _oracle_tolerance(config.nodes)
    ctx.check('oracle_agreement', gap.max(), tolerance, detail=f"M={config.nodes}, {config.points} points")

    homogeneity = max(float(np.max(np.abs(np.asarray(descriptor.evaluate(s * first, s * second)) - closed)))
                      for s in HOMOGENEITY_FACTORS)
    ctx.check('homogeneity', homogeneity, 1e-15, detail=f"factors {HOMOGENEITY_FACTORS}")
    ctx.check('range_upper', np.max(np.abs(closed)), 1.0 + 1e-15)
    if descriptor.kind is SymbolKind.C1_INDICATOR:
        ctx.check('range_lower', closed.min(), -1e-15, upper=False)

    c1 = np.asarray(eval_c1(first, second))
    affine = np.max(np.abs(np.asarray(c1_indicator().evaluate(first, second)) - 0.5 * (1.0 + c1)))
    ctx.check('indicator_affine_relation', affine, 1e-15)
    square = np.max(np.abs(np.asarray(gen22_product(1.0, 1.0).evaluate(first, second)) - c1 ** 2))
    ctx.check('gen22_square', square, 1e-15)
    swap = circular(config.a, config.a)
    symmetry = np.max(np.abs(np.asarray(swap.evaluate(first, second)) - np.asarray(swap.evaluate(second, first))))
    ctx.check('circular_symmetry', symmetry, 0.0)

    moving = np.abs(second) >= 1.0
    difference_form = (np.abs(first + second) - np.abs(first)) / np.where(moving, second, 1.0)
    ctx.check('difference_quotient_form', np.max(np.abs(c1 - difference_form)[moving]), 1e-12)

    smooth = (np.abs(first) > 10 * PRIMITIVE_STEP) & (np.abs(first + second) / math.sqrt(2.0) > 10 * PRIMITIVE_STEP)
    d_xx, d_yy, d_xy = primitive_second_differences(first[smooth], second[smooth], PRIMITIVE_STEP)
    flatness = max(float(np.max(np.abs(d)) if np.size(d) else 0.0) for d in (d_xx, d_yy, d_xy))
    ctx.check('primitive_flatness', flatness, 1e-9, detail=f"step {PRIMITIVE_STEP}")
    jumps = []
    for xi1 in JUMP_POINTS:
        across_origin = primitive_second_differences(0.0, xi1, PRIMITIVE_STEP)[0]
        across_diagonal = primitive_second_differences(-xi1, xi1, PRIMITIVE_STEP)[0]
        jumps.append(max(abs(across_origin + PRIMITIVE_STEP), abs(across_diagonal - PRIMITIVE_STEP)))
    ctx.check('primitive_jumps', max(jumps), 1e-12)

    d = PRIMITIVE_STEP
    right = (eval_c1(-1.0 + d, 1.0) - eval_c1(-1.0, 1.0)) / d
    left = (eval_c1(-1.0, 1.0) - eval_c1(-1.0 - d, 1.0)) / d
    ctx.check('slope_jump', abs(right - left), 0.1, upper=False, detail="xi direction at (-1, 1)")

    names = heatmap_columns(descriptor)
    frame = pd.DataFrame({names[0]: first, names[1]: second, 'closed': closed, 'oracle': oracle, 'gap': gap})
    report = {
        'kind': config.kind,
        'formula': descriptor.formula,
        'points': config.points,
        'nodes': config.nodes,
        'max_gap': float(gap.max()),
        'tolerance': tolerance,
        'homogeneity': homogeneity,
        'slope_jump': float(abs(right - left)),
    }
    ctx.write(f"symbol_check_{config.kind}", frame, report)
    ctx.summary['max_gap'] = float(gap.max())


@monitor_all
def symbol_eval(config: ExperimentConfig, ctx: RunContext) -> None:
    descriptor = _symbol(config)
    circular_kind = descriptor.kind is SymbolKind.CIRCULAR
    point = FrequencyPoint(config.xi, config.xi1, config.xi2 if circular_kind else None)
    value = float(np.real(symbol_at(descriptor, point)))
    oracle = quadrature_oracle(descriptor, point, config.nodes)
    ctx.check('oracle_agreement', abs(value - oracle), _oracle_tolerance(config.nodes))
    report = {
        'kind': config.kind,
        'formula': descriptor.formula,
        'xi': config.xi,
        'xi1': config.xi1,
        'xi2': config.xi2 if circular_kind else None,
        'value': value,
        'oracle': oracle,
        'nodes': config.nodes,
    }
    ctx.write(f"symbol_eval_{config.kind}", pd.DataFrame([report]), report)
    ctx.summary.update(value=value, oracle=oracle)


@monitor_all
def heatmap(config: ExperimentConfig, ctx: RunContext) -> None:
    descriptor = _symbol(config)
    frame = symbol_heatmap(descriptor)
    values = frame['value'].to_numpy()
    ctx.check('range_upper', np.max(np.abs(values)), 1.0 + 1e-15)

    if descriptor.kind in (SymbolKind.C1_SGN, SymbolKind.C1_INDICATOR):
        axis = heatmap_axis()
        spacing = axis[1] - axis[0]
        grid_values = values.reshape(axis.size, axis.size)
        weight = 1.0 if descriptor.kind is SymbolKind.C1_SGN else 0.5
        closed_gap, kink_deficit, off_kink = 0.0, 0.0, 0.0
        for xi1 in (1.0, 2.0, 4.0):
            column = int(np.flatnonzero(axis == xi1)[0])
            section = grid_values[:, column]
            expected = (np.abs(axis + xi1) - np.abs(axis)) / xi1
            if weight != 1.0:
                expected = 0.5 * (1.0 + expected)
            closed_gap = max(closed_gap, float(np.max(np.abs(section - expected))))
            curvature = section[2:] - 2.0 * section[1:-1] + section[:-2]
            kinks = [int(np.flatnonzero(axis == 0.0)[0]) - 1, int(np.flatnonzero(axis == -xi1)[0]) - 1]
            kink_size = weight * 2.0 * spacing / xi1
            kink_deficit = max(kink_deficit, max(0.5 * kink_size - abs(curvature[i]) for i in kinks))
            others = np.delete(curvature, kinks)
            off_kink = max(off_kink, float(np.max(np.abs(others))))
        ctx.check('cross_section_closed_form', closed_gap, 1e-12, detail="xi1 in 1, 2, 4")
        ctx.check('cross_section_kinks', kink_deficit, 0.0, detail="slope jumps at xi = 0 and xi = -xi1")
        ctx.check('cross_section_linear_elsewhere', off_kink, 1e-12)

    ctx.plot(f"heatmap_{config.kind}", frame)
    ctx.write(f"heatmap_{config.kind}_report", report={
        'kind': config.kind,
        'formula': descriptor.formula,
        'size': int(math.isqrt(len(frame))),
        'min': float(values.min()),
        'max': float(values.max()),
    })


# Whitney coefficients

@monitor_all
def coeff_decay(config: ExperimentConfig, ctx: RunContext) -> None:
    part = Part.parse(config.part)
    ws = build_windowed_symbol(part, config.k, _symbol(config))
    shape = DecayShape.PLAIN if part is Part.LOW_HIGH else DecayShape.TILDE

    table = compute_coeffs(ws, config.nmax, config.resolution)
    report = verify_decay(table, shape)
    refined = compute_coeffs(ws, config.nmax, 2 * config.resolution)
    refined_report = verify_decay(refined, shape)

    stability = abs(refined_report.C_quad - report.C_quad) / report.C_quad if report.C_quad else math.inf
    hermitian = float(np.max(np.abs(table.values[::-1, ::-1] - np.conj(table.values))))
    ctx.check('c_quad_stability', stability, 0.1, detail=f"R={config.resolution} vs {2 * config.resolution}")
    ctx.check('hermitian_symmetry', hermitian, 1e-12)
    synthesis = synthesis_error(table, ws, seed=config.seed)
    ctx.check('fourier_synthesis', synthesis, synthesis_tolerance(config.nmax), detail=f"n_max={config.nmax}")

    extra: Dict[str, Any] = {}
    if part is Part.LOW_HIGH:
        ctx.check('decay_exponent_n', report.exp_n, -1.7)
        profile = pd.DataFrame({'n': table.indices(), 'abs': np.abs(table.values[:, table.n_max])})
        ctx.plot(f"coeff_decay_{part.value}_k{config.k}_profile", profile)
    else:
        ratio = off_band_ratio(table, report.C_quad)
        ctx.check('off_band_ratio', ratio, 10.0, detail="|n - n1| > 4, min <n>, <n1> >= 8")
        extra['off_band_ratio'] = ratio
        ctx.plot(f"coeff_decay_{part.value}_k{config.k}_band", band_envelope(table))

    result = {
        **report.to_dict(),
        'shape': shape.value,
        'kind': config.kind,
        'aliasing': table.aliasing,
        'C_quad_refined': refined_report.C_quad,
        'c_quad_stability': stability,
        'hermitian_symmetry': hermitian,
        'synthesis_error': synthesis,
        **extra,
    }
    ctx.write(f"coeff_decay_{part.value}_k{config.k}", table.to_frame(), result, sort_by=['n', 'n1'])
    ctx.summary.update(C_quad=report.C_quad, exp_n=report.exp_n, exp_n1=report.exp_n1)


@monitor_all
def scale_uniformity(config: ExperimentConfig, ctx: RunContext) -> None:
    base = _symbol(config)
    k_list = sorted(set(SCALE_UNIFORMITY_KS) | {config.k})
    rows = []
    for k in k_list:
        deviation = verify_scale_uniformity(base, config.part, [k], config.nmax, config.resolution)
        rows.append({'k': k, 'max_deviation': deviation})
    worst = max(row['max_deviation'] for row in rows)
    ctx.check('scale_uniformity', worst, 1e-8, detail=f"k in {k_list}")
    constant_deviation = verify_scale_uniformity(constant(1.0), config.part, k_list, config.nmax, config.resolution)
    ctx.check('constant_scale_uniformity', constant_deviation, 1e-10)

    frame = pd.DataFrame(rows)
    report = {
        'part': Part.parse(config.part).value,
        'kind': config.kind,
        'k_list': k_list,
        'n_max': config.nmax,
        'resolution': config.resolution,
        'max_deviation': worst,
        'constant_deviation': constant_deviation,
    }
    ctx.write(f"scale_uniformity_{Part.parse(config.part).value}", frame, report, sort_by=['k'])
    ctx.summary['max_deviation'] = worst


# Operators

def _gaussian(x, width=1.0):
    return np.exp(-np.pi * x ** 2 / width)


# (name, f, a = A') with f odd and A even Schwartz, so the commutator decays faster than the period wrap
SCHWARTZ_PAIRS = (
    ('gauss', lambda x: x * _gaussian(x), lambda x: -2 * np.pi * x * _gaussian(x)),
    ('narrow_a', lambda x: x * _gaussian(x, 2.0), lambda x: -4 * np.pi * x * _gaussian(x, 0.5)),
    ('oscillating', lambda x: np.sin(np.pi * x) * _gaussian(x, 2.0),
     lambda x: -(np.pi * np.sin(np.pi * x) + 2 * np.pi * x * np.cos(np.pi * x)) * _gaussian(x)),
    ('cubic', lambda x: x ** 3 * _gaussian(x), lambda x: (2 * x - np.pi * x ** 3) * _gaussian(x, 2.0)),
    ('wide', lambda x: x * _gaussian(x, 4.0),
     lambda x: (2 * x - 0.5 * np.pi * x * (1 + x ** 2)) * _gaussian(x, 4.0)),
)


def _pair_error(L: float, N: int, f_func: Callable, a_func: Callable,
                epsilon: Optional[float] = None) -> float:
    grid = make_grid(L, N)
    f = SampledFunction.from_callable(grid, f_func)
    a = SampledFunction.from_callable(grid, a_func)
    kernel = c1_pv_oracle(f, a, TruncationParams(epsilon))
    return relative_l2_error(kernel, commutator_via_multiplier(f, a))


@monitor_all
def operator_compare(config: ExperimentConfig, ctx: RunContext) -> None:
    grid = make_grid(config.L, config.N)
    epsilon = config.epsilon or None
    f = SampledFunction.from_callable(grid, _gaussian)
    ones = SampledFunction(grid, np.ones(grid.N))
    kernel = c1_pv_oracle(f, ones, TruncationParams(epsilon))
    reference = spectral_hilbert(f).scaled(math.pi)
    hilbert = comparison_report('hilbert', reference, kernel, epsilon or grid.h)
    ctx.check('hilbert_rel_l2', hilbert['rel_l2_error'], 1e-2, detail=f"a = 1, epsilon = {epsilon or grid.h:g}")
    values = kernel.values
    oddness = float(np.max(np.abs(values[1:] + values[:0:-1])) / np.max(np.abs(values)))
    ctx.check('hilbert_oddness', oddness, 1e-8)
    frame = function_frame(kernel, 'kernel').assign(spectral=reference.values.real)
    ctx.plot('operator_compare_hilbert', frame)

    rows = []
    for name, f_func, a_func in SCHWARTZ_PAIRS:
        error = _pair_error(config.L, config.N, f_func, a_func, epsilon)
        # refinement runs at epsilon = h on both grids
        fine = error if epsilon is None else _pair_error(config.L, config.N, f_func, a_func)
        coarse = _pair_error(config.L, config.N // 2, f_func, a_func)
        rows.append({'pair': name, 'N': config.N, 'epsilon': epsilon or grid.h, 'rel_l2_error': error,
                     'fine_rel_l2_error': fine, 'coarse_rel_l2_error': coarse,
                     'ratio': fine / coarse if coarse else math.inf})
    ctx.check('multiplier_vs_kernel', max(row['rel_l2_error'] for row in rows), 3e-2,
              detail=f"{len(rows)} Schwartz pairs at N={config.N}, epsilon={epsilon or grid.h:g}")
    ctx.check('refinement_ratio', max(row['ratio'] for row in rows), 0.7, detail=f"N={config.N // 2} -> {config.N}")

    _, f_func, a_func = SCHWARTZ_PAIRS[0]
    pair_f = SampledFunction.from_callable(grid, f_func)
    pair_a = SampledFunction.from_callable(grid, a_func)
    truncated = [c1_pv_oracle(pair_f, pair_a, TruncationParams(m * grid.h)) for m in (4, 2, 1)]
    first_change = lp_norm(truncated[1] - truncated[0], 2)
    second_change = lp_norm(truncated[2] - truncated[1], 2)
    ctx.check('epsilon_halving', second_change / first_change if first_change else math.inf, 0.6,
              detail="epsilon in 4h, 2h, h")

    L, N = SUPPLEMENT_GRID
    small = make_grid(L, N)
    identities = symbol_identities(
        SampledFunction.from_callable(small, _gaussian),
        SampledFunction.from_callable(small, lambda x: np.cos(2 * np.pi * x) * _gaussian(x)),
        SampledFunction.from_callable(small, lambda x: x * _gaussian(x, 2.0)),
    )
    for name, gap in identities.items():
        ctx.check(f"identity_{name}", gap, 1e-8, detail=f"L={L}, N={N}")

    report = {
        'hilbert': hilbert,
        'hilbert_oddness': oddness,
        'pairs': rows,
        'epsilon_changes': {'4h_to_2h': first_change, '2h_to_h': second_change},
        'epsilon': epsilon or grid.h,
        'identities': identities,
    }
    ctx.write('operator_compare', pd.DataFrame(rows), report, sort_by=['pair'])
    ctx.summary.update(hilbert_rel_l2=hilbert['rel_l2_error'],
                       max_pair_error=max(row['rel_l2_error'] for row in rows))


@monitor_all
def duality_check(config: ExperimentConfig, ctx: RunContext) -> None:
    N = min(config.N, DUALITY_MAX_N)
    if N < config.N:
        logger.info(f"duality_check uses N={N} (requested {config.N}); the lattice sums are O(N^2)")
    grid = make_grid(config.L, N)
    m = _symbol(config)
    star1 = adjoint_symbol(m, 'star1')
    star2 = adjoint_symbol(m, 'star2')
    rng = np.random.default_rng(config.seed)

    rows = []
    for trial in range(DUALITY_TRIPLES):
        f, a, g = (SampledFunction(grid, rng.standard_normal(N)) for _ in range(3))
        value = trilinear_form(m, f, a, g)
        scale = trilinear_scale(f, a, g)
        rows.append({
            'trial': trial,
            'scale': scale,
            'star2_gap': abs(value - trilinear_form(star2, f, g, a)) / scale,
            'star1_gap': abs(value - trilinear_form(star1, g, a, f)) / scale,
            'pairing_gap': abs(value - pairing(apply_multiplier(m, f, a), g)) / scale,
        })
    frame = pd.DataFrame(rows)
    for column in ('star2_gap', 'star1_gap', 'pairing_gap'):
        ctx.check(column, frame[column].max(), 1e-10, detail=f"{DUALITY_TRIPLES} random triples, N={N}")
    ctx.write(f"duality_check_{config.kind}", frame, {
        'kind': config.kind,
        'formula': m.formula,
        'N': N,
        'triples': DUALITY_TRIPLES,
        'max_gaps': {column: float(frame[column].max()) for column in ('star2_gap', 'star1_gap', 'pairing_gap')},
    }, sort_by=['trial'])


# Model operator

def _finest_interval_log2(L: float, N: int) -> int:
    """Smallest log2 |I| whose psi packet (support up to 2/|I|) fits below Nyquist N/(4L)."""
    return 1 + int(round(math.log2(4.0 * L / N)))


def _model_inputs(grid, spec: ModelOperatorSpec, rng: np.random.Generator):
    f = np.zeros(grid.N, dtype=complex)
    g = np.zeros(grid.N, dtype=complex)
    for interval in spec.intervals:
        f += rng.choice([-1.0, 1.0]) * wave_packet(grid, spec.types[0], interval.shift(spec.n1)).values
        g += rng.choice([-1.0, 1.0]) * wave_packet(grid, spec.types[1], interval.shift(spec.n2)).values
    return SampledFunction(grid, f), SampledFunction(grid, g)


@monitor_all
def model_growth(config: ExperimentConfig, ctx: RunContext) -> None:
    grid = make_grid(config.L, config.N)
    require_dyadic_domain(grid)
    finest = _finest_interval_log2(grid.L, grid.N)
    lengths = (finest, finest + 1)
    longest = math.ldexp(1.0, lengths[-1])
    left = -grid.L + (max(config.shifts) + 2) * longest
    intervals = model_collection(lengths, left, MODEL_INTERVALS)
    trials = min(config.trials, MODEL_MAX_TRIALS)
    if trials < config.trials:
        logger.info(f"model_growth uses {trials} trials per shift (requested {config.trials})")

    rows = []
    spec = None
    for n1 in config.shifts:
        spec = ModelOperatorSpec(intervals, n1=n1, n2=0)
        spec.validate_on(grid)
        best = 0.0
        for trial in range(trials):
            f, g = _model_inputs(grid, spec, np.random.default_rng(config.seed + trial))
            best = max(best, model_growth_ratio(spec, f, g))
        rows.append({'n1': n1, 'bracket': bracket(n1), 'ratio': best})
        logger.debug(f"model_growth n1={n1}: ratio {best:.6g}")

    f, g = _model_inputs(grid, spec, np.random.default_rng(config.seed))
    output = apply_model_operator(spec, f, g)
    direct = inner_product(output, output)
    summed = model_trilinear_sum(spec, f, g, output)
    ctx.check('trilinear_sum_equivalence', abs(summed - direct) / abs(direct), 1e-10)

    single_interval = intervals[0]
    single = ModelOperatorSpec((single_interval,), n1=config.shifts[-1], n2=0)
    phi1 = wave_packet(grid, BumpType.PHI, single_interval.shift(single.n1))
    phi2 = wave_packet(grid, BumpType.PSI, single_interval.shift(single.n2))
    expected = wave_packet(grid, BumpType.PSI, single_interval).scaled(1.0 / math.sqrt(single_interval.length))
    ctx.check('single_interval_normalization',
              relative_l2_error(expected, apply_model_operator(single, phi1, phi2)), 1e-10)

    fits: Dict[str, Any] = {}
    if len(rows) >= 2:
        fits = fit_growth([row['n1'] for row in rows], [row['ratio'] for row in rows], 2.0)
        ctx.check('model_growth_exponent', fits['power_exponent'], 0.2, detail="power law in <n1>")

    frame = pd.DataFrame(rows)
    ctx.plot('model_growth_plot', frame[['bracket', 'ratio']])
    ctx.write('model_growth', frame, {
        'interval_log2_lengths': list(lengths),
        'intervals_per_scale': MODEL_INTERVALS,
        'trials': trials,
        'n2': 0,
        'types': [t.value for t in spec.types],
        **fits,
    }, sort_by=['n1'])


# Shifted operators

@monitor_all
def shifted_norms(config: ExperimentConfig, ctx: RunContext) -> None:
    N = min(config.N, SHIFTED_MAX_N)
    if N < config.N:
        logger.info(f"shifted_norms uses N={N} (requested {config.N})")
    grid = make_grid(config.L, N)
    require_dyadic_domain(grid)

    tables = {}
    for operator in ('maximal', 'square'):
        table = measure_norm_growth(operator, config.p, config.shifts, config.trials, config.seed, grid)
        tables[operator] = table
        if len(config.shifts) >= 2:
            ctx.check(f"{operator}_power_exponent", table.power_exponent, 0.25, detail=f"shifts {config.shifts}")
        ctx.plot(f"shifted_norms_{operator}", table, sort_by=['n'])

    floor = measure_norm_growth('maximal', config.p, [0], min(config.trials, IDENTITY_TRIALS), config.seed, grid)
    ctx.check('maximal_identity_floor', floor.norms[0], 1.0 - 1e-12, upper=False, detail="n = 0")

    rng = np.random.default_rng(config.seed)
    worst = 0.0
    covering_rows = []
    for index in range(COVERING_FUNCTIONS):
        f = sparse_steps(grid, rng)
        for n in range(1, COVERING_MAX_SHIFT + 1):
            ratio = covering_ratio(f, n, COVERING_LEVEL)
            worst = max(worst, ratio / covering_bound(n))
            covering_rows.append({'function': index, 'n': n, 'ratio': ratio, 'bound': covering_bound(n)})
    ctx.check('covering_bound', worst, 1.0, detail=f"ratio / (4 (1 + log2 <n>)), n = 1..{COVERING_MAX_SHIFT}")

    first = adversarial_input(grid, 1, np.random.default_rng(config.seed))
    second = adversarial_input(grid, 2, np.random.default_rng(config.seed + 1))
    n = config.shifts[min(1, len(config.shifts) - 1)]
    scale = float(np.max(np.abs(first.values)) + np.max(np.abs(second.values)))
    for name, operator in (('maximal', shifted_maximal), ('square', shifted_square)):
        excess = operator(first + second, n).values.real - operator(first, n).values.real \
            - operator(second, n).values.real
        ctx.check(f"{name}_sublinear", float(np.max(excess)) / scale, 1e-10, detail=f"n={n}")
    sharp_excess = np.max(sharp_shifted_maximal(first, n).values.real - shifted_maximal(first, n).values.real)
    ctx.check('sharp_below_weighted', float(sharp_excess), 1e-12 * scale)
    ctx.check('neighbour_domination', neighbour_domination_gap(first, n), 1e-10 * scale)
    energy = square_coefficient_energy(first, n)
    parseval = abs(lp_norm(shifted_square(first, n), 2) ** 2 - energy) / energy if energy else 0.0
    ctx.check('square_parseval', parseval, 1e-10)

    ctx.write('shifted_norms', pd.DataFrame(covering_rows), {
        'grid': {'L': grid.L, 'N': grid.N},
        'fits': {name: table.fit_record() for name, table in tables.items()},
        'norms': {name: dict(zip(map(str, table.shifts), table.norms)) for name, table in tables.items()},
        'identity_floor': floor.norms[0],
        'covering_worst_fraction': worst,
    }, sort_by=['function', 'n'])
    ctx.summary.update({f"{name}_power_exponent": table.power_exponent for name, table in tables.items()})


@monitor_all
def cz_audit(config: ExperimentConfig, ctx: RunContext) -> None:
    N = min(config.N, CZ_MAX_N)
    if N < config.N:
        logger.info(f"cz_audit uses N={N} (requested {config.N})")
    grid = make_grid(config.L, N)
    require_dyadic_domain(grid)

    rows = []
    failures: Dict[str, int] = {}
    sample = None
    for instance in range(CZ_INSTANCES):
        rng = np.random.default_rng(config.seed + instance)
        f = cz_input(grid, instance, rng)
        # above twice the mean, so neither half of the domain is selected
        lam = float(np.mean(np.abs(f.values))) * rng.uniform(2.5, 16.0)
        result = cz_decompose(f, lam)
        checks = verify_cz(f, result)
        for key, ok in checks.items():
            failures.setdefault(key, 0)
            if not ok:
                failures[key] += 1
        if sample is None and result.intervals:
            sample = result
        rows.append({
            'instance': instance,
            'family': CZ_FAMILIES[instance % len(CZ_FAMILIES)],
            'lambda': lam,
            'selected': len(result.intervals),
            'omega': result.omega_measure,
            'l1_over_lambda': lp_norm(f, 1) / lam,
            'passed': all(checks.values()),
        })

    for key, count in failures.items():
        ctx.require(f"cz_{key}", count == 0, detail=f"{count} of {CZ_INSTANCES} instances fail")
    selected = sum(row['selected'] for row in rows)
    ctx.require('cz_nontrivial', selected > 0, detail=f"{selected} intervals selected in total")

    frame = pd.DataFrame(rows)
    if sample is not None:
        ctx.plot('cz_audit_intervals', sample, sort_by=['k', 'n_index'])
    ctx.write('cz_audit', frame, {
        'instances': CZ_INSTANCES,
        'grid': {'L': grid.L, 'N': grid.N},
        'failures': failures,
        'selected_intervals': selected,
    }, sort_by=['instance'])


EXPERIMENT_RUNNERS: Dict[str, Callable[[ExperimentConfig, RunContext], None]] = {
    'symbol_check': symbol_check,
    'coeff_decay': coeff_decay,
    'scale_uniformity': scale_uniformity,
    'operator_compare': operator_compare,
    'duality_check': duality_check,
    'model_growth': model_growth,
    'shifted_norms': shifted_norms,
    'cz_audit': cz_audit,
    'symbol_eval': symbol_eval,
    'heatmap': heatmap,
}


def manifest_path(config: ExperimentConfig) -> Path:
    return Path(config.out) / f"{config.experiment}_manifest.json"


def run(config: ExperimentConfig) -> RunManifest:
    """Execute the configured experiment and write its manifest, also when it fails."""
    config = validate_config(config)
    ensure_initialized(config)
    run_id = str(uuid.uuid4())[:8]
    started_at = datetime.now()
    start = time.perf_counter()
    ctx = RunContext(config, run_id)
    event_bus.publish(EXPERIMENT_STARTED, {
        'run_id': run_id,
        'experiment': config.experiment,
        'timestamp': started_at.isoformat(),
    })
    logger.info(f"[{run_id}] Running {config.experiment} (L={config.L}, N={config.N}, seed={config.seed})")

    try:
        EXPERIMENT_RUNNERS[config.experiment](config, ctx)
    except Exception as e:
        logger.error(f"[{run_id}] Experiment {config.experiment} raised: {e}", exc_info=True)
        ctx.record(AssertionResult(name='exception', passed=False, detail=f"{type(e).__name__}: {e}"))
        event_bus.publish(EXPERIMENT_FAILED, {'run_id': run_id, 'experiment': config.experiment,
                                                'error': str(e)})

    manifest = RunManifest(
        run_id=run_id,
        experiment=config.experiment,
        config=config.to_dict(),
        started_at=started_at,
        version=__version__,
        duration=time.perf_counter() - start,
        artifacts=list(ctx.artifacts),
        assertions=list(ctx.assertions),
        summary=dict(ctx.summary),
    )
    write_json(manifest.to_dict(), manifest_path(config))

    if monitoring_system.history is not None:
        try:
            monitoring_system.history.insert_run(manifest)
        except Exception as e:
            logger.error(f"Error recording run {run_id}: {e}")

    event_bus.publish(EXPERIMENT_COMPLETED, {
        'run_id': run_id,
        'experiment': config.experiment,
        'passed': manifest.passed,
        'failures': manifest.failures,
        'duration': manifest.duration,
    })
    logger.info(f"[{run_id}] {config.experiment} {'passed' if manifest.passed else 'FAILED'} "
                f"in {manifest.duration:.2f}s; failures: {manifest.failures or 'none'}")
    return manifest
