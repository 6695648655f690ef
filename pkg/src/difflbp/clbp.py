"""Completed local binary patterns: sign and magnitude riu2 codes.

Each pixel is compared against ``P`` neighbours on a circle of radius ``R``
(bilinear interpolation at non-integer positions).  The sign code thresholds
the raw differences at zero, the magnitude code thresholds their absolute
values at the image-wide mean absolute difference ``C``.  Bit patterns with
at most two circular transitions ("uniform") map to their ones-count, all
others share bin ``P + 1``, giving ``P + 2`` histogram bins per code type.

Conventions, fixed for reproducibility (codes are rotation-invariant, so the
choice does not affect descriptors): neighbour 0 sits at angle 0 on the
positive x-axis (x = column, y = row increasing downward), proceeding
counterclockwise; pixels within ``ceil(R)`` of the border are not encoded.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .pde import as_field

# Offsets this close to an integer are snapped exactly, removing spurious
# interpolation on axis-aligned neighbours.
_SNAP_TOL = 1e-9


class PatternKind(enum.Enum):
    SIGN = "sign"
    MAGNITUDE = "magnitude"


@dataclass(frozen=True)
class NeighborhoodSpec:
    """One (P, R) circular sampling configuration.

    ``offsets[p]`` is the real displacement of neighbour p; ``taps[p]`` and
    ``weights[p]`` give its interpolation stencil: integer (dy, dx) taps with
    nonnegative weights summing to 1 (a single tap when the offset snapped to
    an integer position).
    """

    P: int
    R: float
    offsets: tuple
    taps: tuple
    weights: tuple

    @property
    def margin(self) -> int:
        return math.ceil(self.R)


@dataclass(frozen=True)
class LbpHistogram:
    """Normalized (P + 2)-bin histogram of one code type over one image."""

    spec: NeighborhoodSpec
    kind: PatternKind
    bins: np.ndarray
    pixel_count: int


def build_spec(P: int, R: float) -> NeighborhoodSpec:
    """Precompute neighbour offsets and interpolation stencils for (P, R)."""
    if P < 4:
        raise ValueError(f"P must be at least 4, got {P}")
    if R < 1:
        raise ValueError(f"R must be at least 1, got {R}")
    offsets = []
    taps = []
    weights = []
    for p in range(P):
        angle = 2.0 * math.pi * p / P
        dx = R * math.cos(angle)
        dy = R * math.sin(angle)
        snap_x = abs(dx - round(dx)) <= _SNAP_TOL
        snap_y = abs(dy - round(dy)) <= _SNAP_TOL
        if snap_x:
            dx = float(round(dx))
        if snap_y:
            dy = float(round(dy))
        offsets.append((dx, dy))
        if snap_x and snap_y:
            taps.append(np.array([[int(dy), int(dx)]], dtype=np.intp))
            weights.append(np.array([1.0]))
        else:
            x0, y0 = math.floor(dx), math.floor(dy)
            fx, fy = dx - x0, dy - y0
            # Keep a degenerate axis on a single column/row so every tap
            # stays within the ceil(R) margin.
            x1 = x0 + 1 if fx > 0 else x0
            y1 = y0 + 1 if fy > 0 else y0
            taps.append(np.array([[y0, x0], [y0, x1], [y1, x0], [y1, x1]], dtype=np.intp))
            weights.append(np.array([
                (1.0 - fy) * (1.0 - fx),
                (1.0 - fy) * fx,
                fy * (1.0 - fx),
                fy * fx,
            ]))
    return NeighborhoodSpec(P=P, R=float(R), offsets=tuple(offsets),
                            taps=tuple(taps), weights=tuple(weights))


def sample_neighbors(field, x: int, y: int, spec: NeighborhoodSpec) -> np.ndarray:
    """Sample the P neighbour intensities around one valid-region pixel."""
    u = as_field(field)
    height, width = u.shape
    m = spec.margin
    if not (m <= x < width - m and m <= y < height - m):
        raise ValueError(f"center ({x}, {y}) outside the valid region for R={spec.R}")
    out = np.zeros(spec.P)
    for p in range(spec.P):
        acc = 0.0
        for (dy, dx), w in zip(spec.taps[p], spec.weights[p]):
            acc += w * u[y + dy, x + dx]
        out[p] = acc
    return out


def uniformity(bits) -> int:
    """Number of circular 0/1 transitions in a neighbour bit pattern."""
    bits = [1 if b else 0 for b in bits]
    if len(bits) < 2:
        raise ValueError("uniformity needs at least 2 bits")
    count = abs(bits[-1] - bits[0])
    for p in range(1, len(bits)):
        count += abs(bits[p] - bits[p - 1])
    return count


def _riu2(bits) -> int:
    if uniformity(bits) <= 2:
        return int(sum(bits))
    return len(bits) + 1


def sign_code(g_c: float, neighbors) -> int:
    """riu2 bin of the sign pattern: bit p is 1 iff g_p - g_c >= 0."""
    bits = [1 if g - g_c >= 0 else 0 for g in neighbors]
    return _riu2(bits)


def magnitude_code(g_c: float, neighbors, C: float) -> int:
    """riu2 bin of the magnitude pattern: bit p is 1 iff |g_p - g_c| >= C."""
    if C < 0:
        raise ValueError(f"threshold C must be nonnegative, got {C}")
    bits = [1 if abs(g - g_c) >= C else 0 for g in neighbors]
    return _riu2(bits)


def _valid_region(u: np.ndarray, spec: NeighborhoodSpec):
    height, width = u.shape
    m = spec.margin
    h, w = height - 2 * m, width - 2 * m
    if h <= 0 or w <= 0:
        raise ValueError(
            f"image {width}x{height} too small for R={spec.R}: "
            f"needs at least {2 * m + 1} pixels per side"
        )
    return m, h, w


def _neighbor_differences(u: np.ndarray, spec: NeighborhoodSpec) -> np.ndarray:
    """(P, h, w) stack of g_p - g_c over the valid region, via shifted slices.

    The stencil is applied to the differences (tap minus center) rather than
    to raw intensities, so locally constant patches yield exact zeros instead
    of one-ulp interpolation noise that would flip sign bits.
    """
    m, h, w = _valid_region(u, spec)
    center = u[m:m + h, m:m + w]
    diffs = np.empty((spec.P, h, w))
    for p in range(spec.P):
        acc = np.zeros((h, w))
        for (dy, dx), wt in zip(spec.taps[p], spec.weights[p]):
            acc += wt * (u[m + dy:m + dy + h, m + dx:m + dx + w] - center)
        diffs[p] = acc
    return diffs


def _code_map(bits: np.ndarray) -> np.ndarray:
    """Map a (P, h, w) bit stack to per-pixel riu2 bins."""
    P = bits.shape[0]
    transitions = (bits != np.roll(bits, 1, axis=0)).sum(axis=0)
    ones = bits.sum(axis=0)
    return np.where(transitions <= 2, ones, P + 1)


def _bincount(codes: np.ndarray, P: int) -> np.ndarray:
    return np.bincount(codes.ravel(), minlength=P + 2).astype(np.float64)


def magnitude_threshold(field, spec: NeighborhoodSpec) -> float:
    """Mean of |g_p - g_c| over all valid-region centers and all p."""
    u = as_field(field)
    diffs = _neighbor_differences(u, spec)
    return float(np.mean(np.abs(diffs)))


def sign_and_magnitude_histograms(field, spec: NeighborhoodSpec) -> tuple[LbpHistogram, LbpHistogram]:
    """Both code histograms from one pass of neighbour sampling.

    The magnitude threshold C is the mean absolute difference of this field
    under this spec (recomputed per field, never inherited from another
    frame).
    """
    u = as_field(field)
    diffs = _neighbor_differences(u, spec)
    pixel_count = diffs.shape[1] * diffs.shape[2]

    sign_codes = _code_map(diffs >= 0)
    abs_diffs = np.abs(diffs)
    threshold = float(np.mean(abs_diffs))
    mag_codes = _code_map(abs_diffs >= threshold)

    sign_bins = _bincount(sign_codes, spec.P) / pixel_count
    mag_bins = _bincount(mag_codes, spec.P) / pixel_count
    return (
        LbpHistogram(spec=spec, kind=PatternKind.SIGN, bins=sign_bins, pixel_count=pixel_count),
        LbpHistogram(spec=spec, kind=PatternKind.MAGNITUDE, bins=mag_bins, pixel_count=pixel_count),
    )


def histogram(field, spec: NeighborhoodSpec, kind: PatternKind) -> LbpHistogram:
    """Normalized histogram of one code type over the valid region."""
    sign_hist, mag_hist = sign_and_magnitude_histograms(field, spec)
    return sign_hist if kind is PatternKind.SIGN else mag_hist
