#!/usr/bin/env python3
"""
Tests for the shifted maximal and square functions, the covering comparison
and the Calderon-Zygmund decomposition.
"""

import json
import math
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from calderlab.grid import BumpType, DyadicInterval, SampledFunction, frame_packet, lp_norm, make_grid, wave_packet
from calderlab.shifted import (adversarial_input, band_limited_input, brute_force_hardy_littlewood, brute_force_maximal,
                               cell_interval, covering_bound, covering_ratio, cz_decompose, cz_input, fit_growth,
                               hardy_littlewood_maximal, interval_cells, measure_norm_growth,
                               neighbour_domination_gap, require_dyadic_domain, sharp_shifted_maximal,
                               shifted_maximal, shifted_square, sparse_steps, square_coefficient_energy,
                               tree_levels, verify_cz)


def random_function(grid, seed):
    rng = np.random.default_rng(seed)
    return SampledFunction(grid, rng.standard_normal(grid.N))


def test_dyadic_tree_layout():
    grid = make_grid(4, 64)
    assert tree_levels(grid) == [1, 2, 4, 8, 16, 32]
    interval = cell_interval(grid, 8, 3)
    assert interval == DyadicInterval(0, -1), f"Unexpected interval {interval}"
    assert interval_cells(grid, interval) == (8, 3)
    with pytest.raises(ValueError):
        require_dyadic_domain(make_grid(3, 64))
    print("✓ Dyadic tree levels and cell intervals")


def test_sharp_maximal_matches_brute_force():
    grid = make_grid(4, 64)
    f = random_function(grid, 1)
    for n in (0, 1, 3, -2):
        fast = sharp_shifted_maximal(f, n).values.real
        for index in (0, 17, 40, 63):
            slow = brute_force_maximal(f, n, index, weighted=False)
            assert abs(fast[index] - slow) < 1e-12, f"n={n}, index={index}: {fast[index]} vs {slow}"
    assert np.all(sharp_shifted_maximal(f, 0).values.real >= np.abs(f.values) - 1e-15)
    print("✓ Sharp shifted maximal function matches direct evaluation")


def test_weighted_maximal_matches_brute_force():
    grid = make_grid(4, 64)
    f = random_function(grid, 2)
    for n in (0, 2, -3):
        fast = shifted_maximal(f, n).values.real
        sharp = sharp_shifted_maximal(f, n).values.real
        assert np.all(fast >= sharp - 1e-12), "Weights equal one on the shifted interval"
        for index in (5, 31, 58):
            slow = brute_force_maximal(f, n, index)
            assert abs(fast[index] - slow) < 1e-10 * max(1.0, slow)
    print("✓ Weighted shifted maximal function matches direct evaluation")


def test_hardy_littlewood_maximal():
    grid = make_grid(2, 32)
    f = random_function(grid, 3)
    fast = hardy_littlewood_maximal(f).values.real
    for index in (0, 7, 16, 31):
        assert abs(fast[index] - brute_force_hardy_littlewood(f, index)) < 1e-12
    assert np.all(fast >= np.abs(f.values) - 1e-15)
    print("✓ Hardy-Littlewood maximal function matches direct evaluation")


def test_unshifted_dyadic_maximal_is_dominated():
    grid = make_grid(4, 64)
    f = sparse_steps(grid, np.random.default_rng(4))
    assert np.all(sharp_shifted_maximal(f, 0).values.real <= hardy_littlewood_maximal(f).values.real + 1e-12)
    assert covering_ratio(f, 0, 0.25) <= 1.0
    assert covering_bound(0) == 8.0
    assert covering_bound(-6) == 16.0
    print("✓ Dyadic maximal function is dominated by the Hardy-Littlewood one")


def test_neighbour_domination():
    grid = make_grid(4, 64)
    f = random_function(grid, 5)
    for n in (0, 4, -7):
        assert neighbour_domination_gap(f, n) <= 1e-12
    print("✓ Weighted maximal function is dominated by three sharp neighbours")


def test_square_function_energy():
    grid = make_grid(8, 256)
    f = random_function(grid, 6)
    for n in (0, 3):
        square = shifted_square(f, n)
        energy = square_coefficient_energy(f, n)
        assert math.isclose(lp_norm(square, 2) ** 2, energy, rel_tol=1e-10)
    with pytest.raises(ValueError):
        shifted_square(f, 0, bump_type='phi')
    print("✓ Square function norm equals its coefficient energy")


@pytest.mark.parametrize('L, N, interval', [
    (8, 256, DyadicInterval(0, 0)),
    (16, 1024, DyadicInterval(-1, 0)),
])
def test_single_packet_energy(L, N, interval):
    grid = make_grid(L, N)
    packet = wave_packet(grid, BumpType.PSI, interval)
    energy = square_coefficient_energy(packet, 0)
    assert abs(energy - 1.0) <= 0.15, f"Tree energy {energy} of a unit packet"

    own = frame_packet(grid, interval.shift(-2))
    assert math.isclose(square_coefficient_energy(own, 0), 1.0, rel_tol=1e-3)
    assert math.isclose(square_coefficient_energy(own, 2), 1.0, rel_tol=1e-3)
    print(f"✓ A single packet carries its norm through the tree (L={L}, N={N})")


def test_square_frame_bounds_on_band_limited_inputs():
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), 'test_data', 'square_frame_bounds.json')
    with open(path, encoding='utf-8') as fixture:
        bounds = json.load(fixture)
    grid = make_grid(bounds['grid']['L'], bounds['grid']['N'])
    rng = np.random.default_rng(bounds['seed'])
    ratios = []
    for _ in range(bounds['inputs']):
        f = band_limited_input(grid, rng)
        ratios.append(lp_norm(shifted_square(f, bounds['shift']), 2) / lp_norm(f, 2))
    tolerance = bounds['tolerance']
    assert min(ratios) >= bounds['lower'] * (1 - tolerance), f"Lower frame bound drifted: {min(ratios)}"
    assert max(ratios) <= bounds['upper'] * (1 + tolerance), f"Upper frame bound drifted: {max(ratios)}"
    print(f"✓ Square function frame bounds [{min(ratios):.4f}, {max(ratios):.4f}] over {len(ratios)} inputs")


def test_cz_selects_the_unit_interval():
    grid = make_grid(4, 64)
    lam = 1.0
    f = SampledFunction.from_callable(grid, lambda x: np.where((x >= 0) & (x < 1), 2.0 * lam, 0.0))
    result = cz_decompose(f, lam)
    assert result.intervals == [DyadicInterval(0, 0)], "Parent [0, 2) averages exactly lambda"
    assert result.omega_measure == 1.0 and not result.root_selected
    assert np.array_equal(result.good.values, f.values)
    assert len(result.bad) == 1 and not np.any(result.bad[0][1].values)
    assert all(verify_cz(f, result).values())
    print("✓ CZ decomposition of 2 lambda on [0, 1)")


def test_sharp_maximal_values_next_to_an_indicator():
    grid = make_grid(4, 64)
    f = SampledFunction.from_callable(grid, lambda x: np.where((x >= 0) & (x < 1), 1.0, 0.0))
    index = grid.index_of(1.5)
    assert sharp_shifted_maximal(f, 0).values[index] == 0.5, "Best unshifted interval is [0, 2)"
    assert sharp_shifted_maximal(f, 1).values[index] == 1.0, "[1, 2) shifted once is [0, 1)"
    print("✓ Sharp shifted maximal function at x = 1.5")


def test_cz_decomposition_properties():
    grid = make_grid(4, 64)
    for instance in range(9):
        rng = np.random.default_rng(100 + instance)
        f = cz_input(grid, instance, rng)
        lam = 4.0 * float(np.mean(np.abs(f.values)))
        result = cz_decompose(f, lam)
        assert not result.root_selected
        checks = verify_cz(f, result)
        assert all(checks.values()), f"Instance {instance} fails {checks}"
        assert 'good_bound' in checks
    with pytest.raises(ValueError):
        cz_decompose(random_function(grid, 0), 0.0)
    print("✓ Calderon-Zygmund decomposition passes its audit")


def test_cz_on_single_spike():
    grid = make_grid(4, 64)
    values = np.zeros(64)
    values[20] = 8.0
    f = SampledFunction(grid, values)
    result = cz_decompose(f, 1.0)
    frame = result.to_frame()
    assert list(frame.columns) == ['k', 'n_index']
    assert len(result.intervals) == 1
    block, cell = interval_cells(grid, result.intervals[0])
    assert block == 4 and cell == 5, "Largest cell around the spike with average above the level"
    assert math.isclose(result.omega_measure, 4 * grid.h)
    print("✓ Single spike selects one interval")


def test_norm_growth_measurement():
    grid = make_grid(4, 64)
    table = measure_norm_growth('sharp_maximal', 2.0, [0, 1, 4], trials=3, seed=7, grid=grid)
    assert len(table.to_frame()) == 3
    assert table.norms[0] >= 1.0 - 1e-12, "M^0 dominates |f| pointwise"
    assert table.power_exponent is not None
    assert set(table.fit_record()) == {'operator', 'p', 'fit', 'residual', 'root_fit', 'power_exponent'}
    for bad in (dict(p=1.0), dict(p=math.inf)):
        with pytest.raises(ValueError):
            measure_norm_growth('maximal', bad['p'], [0, 1], trials=1, seed=0, grid=grid)
    with pytest.raises(ValueError):
        measure_norm_growth('maximal', 2.0, [1, 1], trials=1, seed=0, grid=grid)
    with pytest.raises(ValueError):
        measure_norm_growth('maximal', 2.0, [0, 1], trials=0, seed=0, grid=grid)
    print("✓ Norm growth measurement")


def test_fit_growth_recovers_log_model():
    shifts = [1, 4, 16, 64, 256]
    norms = [1.0 + 2.0 * math.log(2 + n) for n in shifts]
    fits = fit_growth(shifts, norms, 2.0)
    assert math.isclose(fits['fit']['c1'], 2.0, rel_tol=1e-9)
    assert math.isclose(fits['fit']['c0'], 1.0, rel_tol=1e-9)
    assert fits['residual'] < 1e-9
    print("✓ Growth fit recovers a logarithmic model")


def test_inputs_are_seeded():
    grid = make_grid(4, 64)
    for trial in range(3):
        first = adversarial_input(grid, trial, np.random.default_rng(trial))
        second = adversarial_input(grid, trial, np.random.default_rng(trial))
        assert np.array_equal(first.values, second.values)
        assert np.any(first.values != 0)
    print("✓ Adversarial inputs are reproducible")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
