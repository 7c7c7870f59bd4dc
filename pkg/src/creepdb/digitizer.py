"""Chart digitizer: turns plot images into calibrated data series.

The extraction contract is geometric: axis anchors (tick pixel + tick
value) come from the caller, series identity is a color signature with a
per-channel tolerance, and tracing walks plot columns left to right
taking the centroid row of the color mask in each column.  A synthetic
plot renderer with known ground truth provides the round-trip oracle for
all of it.

Axes may be linear or log10; calibration is a least-squares affine fit
in (log-)data space.  Creep-style traces are cleaned by a monotonicity
pass that drops points falling more than a tolerance below the running
maximum.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (
    AmbiguousTarget,
    DegenerateAnchors,
    EmptyAfterCleaning,
    NonPositiveLogAnchor,
    PreconditionError,
    SeriesNotFound,
)
from .units import parse_unit, standardize

LINEAR = "linear"
LOG10 = "log10"

DEFAULT_COLOR_TOLERANCE = 30
MIN_CHANNEL_SEPARATION = 64  # between any two series colors
MIN_SERIES_PIXELS = 40


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AxisCalibration1D:
    scale: str
    slope: float  # (log-)data units per pixel
    intercept: float
    anchors: tuple[tuple[float, float], ...]  # (pixel, value)
    residuals: tuple[float, ...]

    def to_data(self, pixel):
        u = self.slope * np.asarray(pixel, dtype=np.float64) + self.intercept
        return 10.0**u if self.scale == LOG10 else u

    def to_pixel(self, value):
        v = np.asarray(value, dtype=np.float64)
        u = np.log10(v) if self.scale == LOG10 else v
        return (u - self.intercept) / self.slope

    @property
    def pixel_span(self) -> tuple[float, float]:
        ps = [p for p, _ in self.anchors]
        return min(ps), max(ps)


@dataclass(frozen=True)
class AxisCalibration:
    x: AxisCalibration1D
    y: AxisCalibration1D


def calibrate_axis(anchors, scale: str) -> AxisCalibration1D:
    """Least-squares affine fit of (log-)data values against pixels."""
    if scale not in (LINEAR, LOG10):
        raise PreconditionError(f"unknown axis scale {scale!r}")
    anchors = [(float(p), float(v)) for p, v in anchors]
    if len(anchors) < 2:
        raise DegenerateAnchors("need at least 2 anchors per axis")
    pixels = np.array([p for p, _ in anchors])
    values = np.array([v for _, v in anchors])
    dp = np.diff(pixels)
    dv = np.diff(values)
    if np.any(dp == 0) or not (np.all(dp > 0) or np.all(dp < 0)):
        raise DegenerateAnchors("anchor pixels must be strictly monotone")
    if np.any(dv == 0) or not (np.all(dv > 0) or np.all(dv < 0)):
        raise DegenerateAnchors("anchor values must be strictly monotone")
    if scale == LOG10:
        if np.any(values <= 0):
            raise NonPositiveLogAnchor("log axis anchors must be positive")
        values = np.log10(values)
    slope, intercept = np.polyfit(pixels, values, 1)
    fit = slope * pixels + intercept
    residuals = tuple(float(r) for r in values - fit)
    return AxisCalibration1D(scale, float(slope), float(intercept), tuple(anchors), residuals)


def calibrate_axes(x_anchors, y_anchors, x_scale=LINEAR, y_scale=LINEAR) -> AxisCalibration:
    return AxisCalibration(calibrate_axis(x_anchors, x_scale), calibrate_axis(y_anchors, y_scale))


def pixel_to_data(cal: AxisCalibration, px, py):
    return cal.x.to_data(px), cal.y.to_data(py)


def data_to_pixel(cal: AxisCalibration, x, y):
    return cal.x.to_pixel(x), cal.y.to_pixel(y)


# ---------------------------------------------------------------------------
# synthetic plots (test oracle)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesSpec:
    color: tuple[int, int, int]
    points: np.ndarray  # (n, 2) data-space polyline, ordered by x
    width_px: int = 3
    label: str = ""


@dataclass(frozen=True)
class SyntheticPlotSpec:
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    series: tuple[SeriesSpec, ...]
    x_scale: str = LINEAR
    y_scale: str = LINEAR
    width: int = 900
    height: int = 640
    margin_left: int = 80
    margin_right: int = 40
    margin_top: int = 40
    margin_bottom: int = 70
    gridlines: bool = True
    noise_px: float = 0.0
    n_ticks: int = 5
    background: tuple[int, int, int] = (255, 255, 255)
    axis_color: tuple[int, int, int] = (0, 0, 0)
    grid_color: tuple[int, int, int] = (213, 213, 213)

    def __post_init__(self):
        if not self.series:
            raise PreconditionError("need at least one series")
        colors = [s.color for s in self.series]
        for i in range(len(colors)):
            for j in range(i + 1, len(colors)):
                sep = max(abs(a - b) for a, b in zip(colors[i], colors[j]))
                if sep < MIN_CHANNEL_SEPARATION:
                    raise PreconditionError(
                        f"series colors {colors[i]} and {colors[j]} are too similar"
                    )
        for scale, rng in ((self.x_scale, self.x_range), (self.y_scale, self.y_range)):
            if scale == LOG10 and (rng[0] <= 0 or rng[1] <= 0):
                raise PreconditionError("log axis range must be positive")
            if rng[1] <= rng[0]:
                raise PreconditionError("axis range must be increasing")


@dataclass(frozen=True)
class RenderedPlot:
    image: np.ndarray
    spec: SyntheticPlotSpec
    truth: tuple[np.ndarray, ...]  # ground-truth (n, 2) per series
    x_anchors: tuple[tuple[float, float], ...]
    y_anchors: tuple[tuple[float, float], ...]

    def calibration(self) -> AxisCalibration:
        return calibrate_axes(self.x_anchors, self.y_anchors, self.spec.x_scale, self.spec.y_scale)


def _axis_u(scale, lo, hi):
    if scale == LOG10:
        return np.log10(lo), np.log10(hi)
    return float(lo), float(hi)


def render_synthetic_plot(spec: SyntheticPlotSpec, rng=None) -> RenderedPlot:
    """Rasterize a plot spec; returns the image plus calibration anchors
    and the ground-truth series for round-trip checks."""
    rng = rng or np.random.default_rng(0)
    h, w = spec.height, spec.width
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:, :] = spec.background

    col0, col1 = spec.margin_left, w - spec.margin_right  # [col0, col1)
    row0, row1 = spec.margin_top, h - spec.margin_bottom  # [row0, row1)

    ux0, ux1 = _axis_u(spec.x_scale, *spec.x_range)
    uy0, uy1 = _axis_u(spec.y_scale, *spec.y_range)

    def x_to_col(x):
        u = np.log10(x) if spec.x_scale == LOG10 else np.asarray(x, dtype=np.float64)
        return col0 + (u - ux0) / (ux1 - ux0) * (col1 - 1 - col0)

    def y_to_row(y):
        u = np.log10(y) if spec.y_scale == LOG10 else np.asarray(y, dtype=np.float64)
        return row1 - 1 - (u - uy0) / (uy1 - uy0) * (row1 - 1 - row0)

    # tick anchors, evenly spaced in (log-)data units
    xs_u = np.linspace(ux0, ux1, spec.n_ticks)
    ys_u = np.linspace(uy0, uy1, spec.n_ticks)
    x_vals = 10.0**xs_u if spec.x_scale == LOG10 else xs_u
    y_vals = 10.0**ys_u if spec.y_scale == LOG10 else ys_u
    x_anchors = tuple((float(x_to_col(v)), float(v)) for v in x_vals)
    y_anchors = tuple((float(y_to_row(v)), float(v)) for v in y_vals)

    if spec.gridlines:
        for p, _ in x_anchors:
            c = int(round(p))
            if col0 <= c < col1:
                img[row0:row1, c] = spec.grid_color
        for p, _ in y_anchors:
            r = int(round(p))
            if row0 <= r < row1:
                img[r, col0:col1] = spec.grid_color

    # axis lines and tick marks sit outside the plot interior
    img[row0 : row1 + 1, col0 - 2 : col0] = spec.axis_color
    img[row1 : row1 + 2, col0 - 2 : col1] = spec.axis_color
    for p, _ in x_anchors:
        c = int(round(p))
        img[row1 + 2 : row1 + 8, max(c - 1, 0) : c + 1] = spec.axis_color
    for p, _ in y_anchors:
        r = int(round(p))
        img[max(r - 1, 0) : r + 1, col0 - 8 : col0 - 2] = spec.axis_color

    # series
    for s in spec.series:
        pts = np.asarray(s.points, dtype=np.float64)
        cols = x_to_col(pts[:, 0])
        rows = y_to_row(pts[:, 1])
        samples_c, samples_r = [], []
        for i in range(len(pts) - 1):
            n = int(max(abs(cols[i + 1] - cols[i]), abs(rows[i + 1] - rows[i])) * 2) + 2
            tt = np.linspace(0.0, 1.0, n)
            samples_c.append(cols[i] + (cols[i + 1] - cols[i]) * tt)
            samples_r.append(rows[i] + (rows[i + 1] - rows[i]) * tt)
        cc = np.concatenate(samples_c)
        rr = np.concatenate(samples_r)
        if spec.noise_px > 0:
            rr = rr + rng.uniform(-spec.noise_px, spec.noise_px, rr.shape)
        ci = np.round(cc).astype(np.intp)
        ri = np.round(rr).astype(np.intp)
        radius = max((s.width_px - 1) // 2, 0)
        offsets = [
            (dr, dc)
            for dr in range(-radius, radius + 1)
            for dc in range(-radius, radius + 1)
            if dr * dr + dc * dc <= radius * radius + radius * 0.5 + 0.26
        ]
        for dr, dc in offsets:
            r = ri + dr
            c = ci + dc
            keep = (r >= row0) & (r < row1) & (c >= col0) & (c < col1)
            img[r[keep], c[keep]] = s.color

    truth = tuple(np.asarray(s.points, dtype=np.float64).copy() for s in spec.series)
    return RenderedPlot(img, spec, truth, x_anchors, y_anchors)


# ---------------------------------------------------------------------------
# extraction
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeriesTrace:
    series_key: tuple[int, int, int] | str
    points: np.ndarray  # (n, 2) data units, strictly increasing x
    pixel_points: np.ndarray  # (n, 2) (col, row)
    quality: float
    flags: tuple[str, ...] = field(default=())


def color_mask(image: np.ndarray, color, tolerance=DEFAULT_COLOR_TOLERANCE) -> np.ndarray:
    diff = np.abs(image.astype(np.int16) - np.asarray(color, dtype=np.int16))
    return np.all(diff <= tolerance, axis=-1).astype(np.uint8)


def _interior_window(image, cal: AxisCalibration, inset=1):
    h, w = image.shape[:2]
    c_lo, c_hi = cal.x.pixel_span
    r_a, r_b = cal.y.pixel_span
    col0 = max(int(np.ceil(min(c_lo, c_hi))) + inset, 0)
    col1 = min(int(np.floor(max(c_lo, c_hi))) - inset + 1, w)
    row0 = max(int(np.ceil(min(r_a, r_b))) + inset, 0)
    row1 = min(int(np.floor(max(r_a, r_b))) - inset + 1, h)
    return col0, col1, row0, row1


def extract_series(
    image: np.ndarray,
    cal: AxisCalibration,
    series_keys,
    *,
    color_tolerance: int = DEFAULT_COLOR_TOLERANCE,
    min_pixels: int = MIN_SERIES_PIXELS,
    impl=None,
) -> list[SeriesTrace]:
    """Trace each color key through the plot interior, column by column."""
    if not series_keys:
        raise PreconditionError("need at least one series key")
    col0, col1, row0, row1 = _interior_window(image, cal)
    if col1 <= col0 or row1 <= row0:
        raise PreconditionError("calibration window is empty")
    traces = []
    for key in series_keys:
        mask = color_mask(image, key, color_tolerance)
        centroids, counts = kernels.column_centroids(mask, col0, col1, row0, row1, impl=impl)
        total = int(counts.sum())
        if total < min_pixels:
            raise SeriesNotFound(
                f"color {tuple(key)}: {total} pixels inside plot window (< {min_pixels})"
            )
        found = counts > 0
        cols = np.arange(col0, col1, dtype=np.float64)[found]
        rows = centroids[found]
        xs, ys = pixel_to_data(cal, cols, rows)
        order = np.argsort(xs, kind="stable")
        pixel_points = np.column_stack([cols, rows])[order]
        points = np.column_stack([xs, ys])[order]
        quality = float(found.sum()) / float(col1 - col0)
        traces.append(SeriesTrace(tuple(int(v) for v in key), points, pixel_points, quality))
    return traces


_QUANTITY_RE = re.compile(
    r"([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*([A-Za-z%°][A-Za-z0-9%°/^*·.\-]*)?"
)


def parse_quantity(text: str) -> tuple[float, str]:
    """First number (+ optional unit token) in a label like '31.6 MPa'."""
    m = _QUANTITY_RE.search(text)
    if not m:
        raise PreconditionError(f"no quantity found in {text!r}")
    value = float(m.group(1))
    unit = (m.group(2) or "1").rstrip(".,;:")
    return value, unit


def select_target_series(traces, labels, target_text: str) -> SeriesTrace:
    """Pick the trace whose label names the same physical quantity as the
    target condition, after unit standardization."""
    if len(traces) != len(labels):
        raise PreconditionError("need one label per trace")
    t_value, t_unit = parse_quantity(target_text)
    t_dim = parse_unit(t_unit).dimension
    t_std = standardize(t_value, t_unit)
    matches = []
    for trace, label in zip(traces, labels):
        try:
            value, unit = parse_quantity(label)
        except PreconditionError:
            continue
        u = parse_unit(unit)
        if u.dimension != t_dim:
            continue
        std = standardize(value, unit)
        if abs(std - t_std) <= 1e-9 * max(1.0, abs(std), abs(t_std)):
            matches.append(trace)
    if len(matches) != 1:
        raise AmbiguousTarget(
            f"target {target_text!r} matched {len(matches)} of {len(labels)} series labels"
        )
    return matches[0]


def enforce_monotonicity(trace: SeriesTrace, tolerance: float) -> tuple[SeriesTrace, list[dict]]:
    """Collapse duplicate x to the mean y, then drop points falling more
    than `tolerance` below the running maximum.  Idempotent."""
    pts = np.asarray(trace.points, dtype=np.float64)
    pix = np.asarray(trace.pixel_points, dtype=np.float64)
    if pts.size == 0:
        raise EmptyAfterCleaning("trace has no points")
    if np.any(np.diff(pts[:, 0]) < 0):
        raise PreconditionError("points must be ordered by x")

    # collapse duplicate x
    xs, ys, px = [], [], []
    i = 0
    n = len(pts)
    while i < n:
        j = i
        while j + 1 < n and pts[j + 1, 0] == pts[i, 0]:
            j += 1
        xs.append(pts[i, 0])
        ys.append(float(pts[i : j + 1, 1].mean()))
        px.append(pix[i])
        i = j + 1

    flags: list[dict] = []
    keep_x, keep_y, keep_p = [], [], []
    running = -np.inf
    for x, y, p in zip(xs, ys, px):
        if y < running - tolerance:
            flags.append({"x": float(x), "y": float(y), "reason": "below running maximum"})
            continue
        keep_x.append(x)
        keep_y.append(y)
        keep_p.append(p)
        running = max(running, y)

    if len(keep_x) * 2 <= len(xs):
        raise EmptyAfterCleaning(
            f"monotonicity cleaning dropped {len(xs) - len(keep_x)} of {len(xs)} points"
        )
    cleaned = SeriesTrace(
        trace.series_key,
        np.column_stack([keep_x, keep_y]),
        np.asarray(keep_p, dtype=np.float64).reshape(len(keep_p), 2),
        trace.quality,
        trace.flags + (f"{len(flags)} points dropped",) if flags else trace.flags,
    )
    return cleaned, flags


def trace_to_csv(trace: SeriesTrace, cal: AxisCalibration | None = None) -> str:
    """Two-column export with calibration metadata in header comments."""
    lines = []
    if cal is not None:
        lines.append(
            f"# x axis: {cal.x.scale}, slope={cal.x.slope!r}, intercept={cal.x.intercept!r}"
        )
        lines.append(
            f"# y axis: {cal.y.scale}, slope={cal.y.slope!r}, intercept={cal.y.intercept!r}"
        )
    lines.append(f"# series: {trace.series_key}, quality={trace.quality:.4f}")
    lines.append("time_s,strain")
    for x, y in trace.points:
        lines.append(f"{x!r},{y!r}")
    return "\n".join(lines) + "\n"
