import math

import numpy as np
import pytest

from difflbp.clbp import (
    PatternKind,
    build_spec,
    histogram,
    magnitude_code,
    magnitude_threshold,
    sample_neighbors,
    sign_and_magnitude_histograms,
    sign_code,
    uniformity,
)

from oracles import bilinear_sample, circular_transitions, riu2_bin


def bits_of(pattern: int, P: int):
    return [(pattern >> p) & 1 for p in range(P)]


def test_build_spec_8_1_snaps_axis_neighbors():
    spec = build_spec(8, 1)
    assert spec.offsets[0] == (1.0, 0.0)
    assert spec.offsets[2] == (0.0, 1.0)
    assert spec.offsets[4] == (-1.0, 0.0)
    assert spec.offsets[6] == (0.0, -1.0)
    for p in (0, 2, 4, 6):
        assert len(spec.taps[p]) == 1 and spec.weights[p][0] == 1.0
    half_sqrt2 = math.sqrt(2) / 2
    for p in (1, 3, 5, 7):
        dx, dy = spec.offsets[p]
        assert abs(abs(dx) - half_sqrt2) < 1e-12 and abs(abs(dy) - half_sqrt2) < 1e-12
        assert len(spec.taps[p]) == 4
        assert abs(spec.weights[p].sum() - 1.0) <= 1e-12


def test_build_spec_4_1_all_integer():
    spec = build_spec(4, 1)
    for p in range(4):
        assert len(spec.taps[p]) == 1


def test_build_spec_16_2_offset_p1():
    spec = build_spec(16, 2)
    dx, dy = spec.offsets[1]
    assert abs(dx - 2 * math.cos(math.pi / 8)) <= 1e-12
    assert abs(dy - 2 * math.sin(math.pi / 8)) <= 1e-12
    assert abs(spec.weights[1].sum() - 1.0) <= 1e-12


def test_build_spec_rejects_bad_parameters():
    with pytest.raises(ValueError):
        build_spec(3, 1)
    with pytest.raises(ValueError):
        build_spec(8, 0.5)


def test_sample_neighbors_constant():
    spec = build_spec(8, 1)
    out = sample_neighbors(np.full((9, 9), 3.5), 4, 4, spec)
    assert np.allclose(out, 3.5, atol=1e-12)


def test_sample_neighbors_ramp():
    spec = build_spec(4, 1)
    xs = np.tile(np.arange(12.0), (12, 1))
    out = sample_neighbors(xs, 5, 5, spec)
    assert np.allclose(out, [6.0, 5.0, 4.0, 5.0], atol=0)


def test_sample_neighbors_matches_bilinear_oracle():
    rng = np.random.default_rng(21)
    u = rng.uniform(0, 255, size=(9, 9))
    spec = build_spec(8, 1)
    out = sample_neighbors(u, 4, 4, spec)
    for p in range(8):
        dx, dy = spec.offsets[p]
        expected = bilinear_sample(u, 4 + dx, 4 + dy)
        assert abs(out[p] - expected) <= 1e-12


def test_sample_neighbors_rejects_border_center():
    spec = build_spec(8, 1)
    with pytest.raises(ValueError):
        sample_neighbors(np.zeros((5, 5)), 0, 2, spec)


def test_uniformity_examples():
    assert uniformity([0] * 8) == 0
    assert uniformity([0, 0, 0, 0, 1, 1, 1, 1]) == 2
    assert uniformity([0, 1, 0, 1, 0, 1, 0, 1]) == 8


def test_sign_code_examples():
    assert sign_code(5.0, [6.0] * 8) == 8
    assert sign_code(5.0, [6, 6, 6, 6, 4, 4, 4, 4]) == 4
    assert sign_code(5.0, [6, 4, 6, 4, 6, 4, 6, 4]) == 9


def test_sign_code_tie_counts_as_one():
    # Heaviside H(0) = 1: equality with the center sets the bit.
    assert sign_code(5.0, [5.0] * 8) == 8


def test_magnitude_code_examples():
    assert magnitude_code(7.0, [7.0] * 8, 0.0) == 8
    assert magnitude_code(0.0, [9, 9, 9, 9, 1, 1, 1, 1], 5.0) == 4
    assert magnitude_code(0.0, [9, 1, 9, 1, 9, 1, 9, 1], 5.0) == 9
    with pytest.raises(ValueError):
        magnitude_code(0.0, [1.0] * 8, -1.0)


def test_riu2_exhaustive_p8_against_transition_oracle():
    g_c = 5.0
    uniform_patterns = 0
    for pattern in range(256):
        bits = bits_of(pattern, 8)
        assert uniformity(bits) == circular_transitions(bits)
        assert uniformity(bits) % 2 == 0
        if circular_transitions(bits) <= 2:
            uniform_patterns += 1
        neighbors = [g_c + (1.0 if b else -1.0) for b in bits]
        assert sign_code(g_c, neighbors) == riu2_bin(bits)
    assert uniform_patterns == 58  # P*(P-1) + 2


def test_codes_rotation_invariant_exhaustive_p8():
    g_c = 5.0
    for pattern in range(256):
        bits = bits_of(pattern, 8)
        neighbors = [g_c + (2.0 if b else -2.0) for b in bits]
        s0 = sign_code(g_c, neighbors)
        m0 = magnitude_code(g_c, neighbors, 2.0)
        for shift in range(1, 8):
            rotated = neighbors[shift:] + neighbors[:shift]
            assert sign_code(g_c, rotated) == s0
            assert magnitude_code(g_c, rotated, 2.0) == m0


def test_sign_code_monotone_invariance():
    rng = np.random.default_rng(22)
    for _ in range(50):
        g_c = rng.uniform(1, 254)
        neighbors = rng.uniform(1, 254, size=8)
        base = sign_code(g_c, neighbors)
        for f in (lambda v: np.exp(v / 100.0), lambda v: v**3, lambda v: 2.0 * v + 7.0):
            assert sign_code(f(g_c), [f(g) for g in neighbors]) == base


def test_magnitude_code_affine_equivariance():
    rng = np.random.default_rng(23)
    for _ in range(50):
        g_c = rng.uniform(0, 255)
        neighbors = rng.uniform(0, 255, size=8)
        C = rng.uniform(0.5, 50.0)
        # Keep away from |g_p - g_c| == C ties so float noise cannot flip bits.
        if np.min(np.abs(np.abs(neighbors - g_c) - C)) < 1e-6:
            continue
        a, b = rng.uniform(0.1, 10.0), rng.uniform(-100, 100)
        base = magnitude_code(g_c, neighbors, C)
        assert magnitude_code(a * g_c + b, a * neighbors + b, a * C) == base


def test_magnitude_threshold_examples():
    spec = build_spec(4, 1)
    assert magnitude_threshold(np.full((8, 8), 12.0), spec) == 0.0

    yy, xx = np.indices((10, 10))
    checker = ((xx + yy) % 2).astype(float)
    assert abs(magnitude_threshold(checker, spec) - 1.0) <= 1e-12


def test_magnitude_threshold_matches_double_loop_oracle():
    rng = np.random.default_rng(24)
    u = rng.uniform(0, 255, size=(16, 16))
    spec = build_spec(8, 1)
    total, count = 0.0, 0
    for y in range(1, 15):
        for x in range(1, 15):
            for g in sample_neighbors(u, x, y, spec):
                total += abs(g - u[y, x])
                count += 1
    assert abs(magnitude_threshold(u, spec) - total / count) <= 1e-12


def test_magnitude_threshold_rejects_small_image():
    with pytest.raises(ValueError):
        magnitude_threshold(np.zeros((2, 2)), build_spec(8, 1))


def test_histogram_constant_field():
    spec = build_spec(8, 1)
    u = np.full((10, 10), 42.0)
    h_sign = histogram(u, spec, PatternKind.SIGN)
    assert h_sign.pixel_count == 64
    expected = np.zeros(10)
    expected[8] = 1.0
    assert np.array_equal(h_sign.bins, expected)
    h_mag = histogram(u, spec, PatternKind.MAGNITUDE)
    assert np.array_equal(h_mag.bins, expected)


@pytest.mark.parametrize("P,R,size", [(8, 1, 12), (16, 2, 14)])
def test_histogram_matches_per_pixel_recount(P, R, size):
    rng = np.random.default_rng(25)
    u = rng.uniform(0, 255, size=(size, size))
    spec = build_spec(P, R)
    m = spec.margin
    threshold = magnitude_threshold(u, spec)
    sign_counts = np.zeros(P + 2)
    mag_counts = np.zeros(P + 2)
    for y in range(m, size - m):
        for x in range(m, size - m):
            neighbors = sample_neighbors(u, x, y, spec)
            sign_counts[sign_code(u[y, x], neighbors)] += 1
            mag_counts[magnitude_code(u[y, x], neighbors, threshold)] += 1
    n = (size - 2 * m) ** 2
    h_sign, h_mag = sign_and_magnitude_histograms(u, spec)
    assert h_sign.pixel_count == n and h_mag.pixel_count == n
    assert np.array_equal(h_sign.bins, sign_counts / n)
    assert np.array_equal(h_mag.bins, mag_counts / n)


def test_histogram_mass_and_bounds():
    rng = np.random.default_rng(26)
    u = rng.uniform(0, 255, size=(20, 17))
    for P, R in [(8, 1), (16, 2), (24, 3), (24, 4)]:
        spec = build_spec(P, R)
        for kind in PatternKind:
            h = histogram(u, spec, kind)
            assert h.pixel_count == (17 - 2 * spec.margin) * (20 - 2 * spec.margin)
            assert abs(h.bins.sum() - 1.0) <= 1e-12
            assert np.all(h.bins >= 0.0)
