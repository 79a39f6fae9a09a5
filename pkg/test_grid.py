#!/usr/bin/env python3
"""
Tests for grids, transforms, norms, dyadic intervals and Littlewood-Paley bumps.
"""

import math
import os
import sys

import numpy as np
import pytest

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from calderlab.grid import (BumpType, Direction, DyadicInterval, SampledFunction, Side, bracket, dft,
                            frame_packet, inner_product, lp_norm, make_bump_family, make_grid, make_lp_family,
                            mother_cutoff, orthonormal_profile, partition_sum, psi_hat, phi_hat, shift,
                            wave_packet)


def test_make_grid_rejects_bad_parameters():
    for L, N in ((0.0, 64), (-1.0, 64), (8.0, 100), (8.0, 4)):
        with pytest.raises(ValueError):
            make_grid(L, N)
    grid = make_grid(8, 256)
    assert grid.h == 1.0 / 16, f"Unexpected spacing {grid.h}"
    assert grid.points()[0] == -8.0 and grid.points()[-1] == 8.0 - grid.h
    assert grid.nyquist == 8.0
    print("✓ Grid construction and validation")


def test_sampled_function_checks_shape_and_side():
    grid = make_grid(4, 32)
    with pytest.raises(ValueError):
        SampledFunction(grid, np.zeros(31))
    f = SampledFunction(grid, np.ones(32))
    g = SampledFunction(make_grid(4, 64), np.ones(64))
    with pytest.raises(ValueError):
        f + g
    with pytest.raises(ValueError):
        dft(f, Direction.INVERSE)
    print("✓ Sampled functions reject mismatched shapes, grids and sides")


def test_forward_transform_of_gaussian():
    grid = make_grid(8, 256)
    f = SampledFunction.from_callable(grid, lambda x: np.exp(-np.pi * x ** 2))
    spectrum = dft(f)
    expected = np.exp(-np.pi * grid.frequencies() ** 2)
    assert spectrum.side is Side.FREQUENCY
    assert np.max(np.abs(spectrum.values - expected)) < 1e-12, "Gaussian should be its own transform"
    print("✓ Forward transform matches the continuous Fourier transform")


def test_parseval_and_inverse():
    grid = make_grid(4, 128)
    rng = np.random.default_rng(3)
    f = SampledFunction(grid, rng.standard_normal(128) + 1j * rng.standard_normal(128))
    spectrum = dft(f)
    assert abs(lp_norm(spectrum, 2) - lp_norm(f, 2)) < 1e-12 * lp_norm(f, 2)
    back = dft(spectrum, Direction.INVERSE)
    assert np.max(np.abs(back.values - f.values)) < 1e-12
    print("✓ Parseval identity and inverse transform")


def test_norms_and_inner_product():
    grid = make_grid(2, 16)
    one = SampledFunction(grid, np.ones(16))
    assert math.isclose(lp_norm(one, 1), 4.0)
    assert math.isclose(lp_norm(one, 2), 2.0)
    assert lp_norm(one, math.inf) == 1.0
    assert math.isclose(inner_product(one, one.scaled(1j)).imag, -4.0)
    with pytest.raises(ValueError):
        lp_norm(one, 0)
    print("✓ Riemann-sum norms and inner product")


def test_bracket_and_dyadic_intervals():
    assert bracket(0) == 2 and bracket(-3) == 5
    interval = DyadicInterval(2, 3)
    assert (interval.left, interval.right, interval.length) == (12.0, 16.0, 4.0)
    assert shift(interval, 1) == DyadicInterval(2, 2), "Shift moves the interval to the left"
    assert interval.shift(-2).left == 20.0
    assert interval.parent() == DyadicInterval(3, 1)
    left, right = interval.children()
    assert interval.contains(left) and interval.contains(right)
    assert not interval.contains(interval.parent())
    assert interval.contains_point(12.0) and not interval.contains_point(16.0)
    fine = DyadicInterval(-1, -3)
    assert fine.left == -1.5 and fine.length == 0.5
    print("✓ Dyadic interval arithmetic")


def test_cutoff_and_bump_supports():
    xi = np.linspace(-10, 10, 4001)
    chi = mother_cutoff(xi)
    assert np.all(chi[np.abs(xi) <= 0.5] == 1.0) and np.all(chi[np.abs(xi) >= 1.0] == 0.0)
    for k in (-1, 0, 2):
        window = psi_hat(xi, k)
        outside = (np.abs(xi) <= 2.0 ** (k - 1)) | (np.abs(xi) >= 2.0 ** (k + 1))
        assert np.all(window[outside] == 0.0), f"psi window k={k} leaks outside its annulus"
        assert np.all(phi_hat(xi, k)[np.abs(xi) >= 2.0 ** k] == 0.0)
    print("✓ Cutoff and bump supports")


def test_littlewood_paley_partition_of_unity():
    grid = make_grid(16, 1024)
    families = make_lp_family(-2, 3, grid)
    xi = np.linspace(0.25, 8.0, 2000)
    total = partition_sum(families, np.concatenate([xi, -xi]))
    assert np.max(np.abs(total - 1.0)) < 1e-12, "Psi windows must sum to one on the covered range"
    with pytest.raises(ValueError):
        make_lp_family(3, 1, grid)
    print("✓ Littlewood-Paley partition of unity")


def test_bump_family_normalization_and_scale_checks():
    grid = make_grid(16, 1024)
    family = make_bump_family(grid, BumpType.PSI, 1)
    assert math.isclose(lp_norm(family.profile, 2), 1.0, rel_tol=1e-12)
    low, high = family.measured_support()
    assert low >= 1.0 and high <= 4.0
    assert family.companion().bump_type is BumpType.PHI
    with pytest.raises(ValueError):
        make_bump_family(grid, BumpType.PSI, 5)
    with pytest.raises(ValueError):
        make_bump_family(grid, BumpType.PHI, -8)
    print("✓ Bump families are L2 normalized and scale checked")


def test_wave_packet_is_normalized_and_localized():
    grid = make_grid(16, 1024)
    interval = DyadicInterval(0, 3)
    packet = wave_packet(grid, BumpType.PSI, interval)
    assert np.all(packet.values.imag == 0.0)
    assert math.isclose(lp_norm(packet, 2), 1.0, rel_tol=1e-9)
    peak = grid.points()[int(np.argmax(np.abs(packet.values)))]
    assert abs(peak - interval.center) < 1e-9, f"Packet peak {peak} away from center {interval.center}"
    print("✓ Wave packets are normalized and centered on their interval")


def test_orthonormal_profile_squares_tile_the_half_line():
    t = np.linspace(0.4, 5.0, 777)
    total = sum(orthonormal_profile(math.ldexp(1.0, j) * t) ** 2 for j in range(-6, 7))
    assert np.max(np.abs(total - 1.0)) < 1e-12
    assert orthonormal_profile(np.array([0.0, 1.0 / 3.0, 4.0 / 3.0, 2.0])).tolist() == [0.0, 0.0, 0.0, 0.0]
    assert math.isclose(float(orthonormal_profile(np.array([-2.0 / 3.0]))[0]), 1.0)
    print("✓ Squared dyadic dilates of the packet profile sum to one")


def test_frame_packets_are_orthonormal():
    grid = make_grid(16, 1024)
    interval = DyadicInterval(-1, 2)
    packet = frame_packet(grid, interval)
    assert packet.values.dtype.kind == 'f'
    assert math.isclose(lp_norm(packet, 2), 1.0, rel_tol=1e-6)
    for other in (interval.shift(1), interval.shift(-3), DyadicInterval(0, 1), DyadicInterval(-2, 4)):
        overlap = inner_product(packet, frame_packet(grid, other))
        assert abs(overlap) < 1e-6, f"{interval} and {other} overlap by {overlap}"
    with pytest.raises(ValueError):
        frame_packet(grid, DyadicInterval(-6, 0))
    print("✓ Packets on distinct dyadic cells are orthonormal")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
