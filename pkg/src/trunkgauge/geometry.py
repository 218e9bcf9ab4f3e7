"""Pad geometry and the pixel-to-millimetre measurement.

Coordinates are ``(x, y) = (column, row)`` with y pointing down.  The pad
*axis* is the unit vector along a pad's long side (the calibration segment
CD); the measurement direction is its perpendicular ``(a_y, -a_x)``.

Every computation on pixel coordinates first subtracts an integer origin
(the minimum column/row of the pixels involved), so results are exactly
invariant to integer translations of the mask.
"""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage

from ._validation import check_mask
from .exceptions import AmbiguousAxisError, GeometryError, PadsNotFoundError

__all__ = [
    "PadRegion", "EdgePairSample", "GapEstimate", "MeasureConfig", "MeasurementResult",
    "extract_pad_regions", "estimate_axis", "sample_edge_pairs", "mean_gap_pixels",
    "pad_height_pixels", "measure_diameter", "default_min_area",
]

MIN_AXIS_RATIO = 1.5
MAX_STATIONS = 50
STATION_FRACTION = 0.8
_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, eq=False)
class PadRegion:
    """One 8-connected component of pad pixels."""

    cols: np.ndarray
    rows: np.ndarray
    label: int = 0

    @property
    def area(self):
        return int(self.cols.shape[0])

    @cached_property
    def origin(self):
        return np.array([self.cols.min(), self.rows.min()])

    def local_xy(self, origin=None):
        o = self.origin if origin is None else origin
        return np.column_stack([self.cols - o[0], self.rows - o[1]]).astype(np.float64)

    @cached_property
    def centroid(self):
        return self.local_xy().mean(axis=0) + self.origin

    @cached_property
    def _axis_and_ratio(self):
        if self.area < 2:
            raise GeometryError(f"region of {self.area} pixel(s) has no axis", stage="axis")
        d = self.local_xy()
        d -= d.mean(axis=0)
        cov = d.T @ d / d.shape[0]
        vals, vecs = np.linalg.eigh(cov)
        ratio = np.inf if vals[0] <= 0 else vals[1] / vals[0]
        axis = vecs[:, 1]
        if axis[1] < 0 or (axis[1] == 0 and axis[0] < 0):
            axis = -axis
        return axis / np.hypot(*axis), float(ratio)

    @property
    def principal_axis(self):
        return self._axis_and_ratio[0]


@dataclass(frozen=True)
class EdgePairSample:
    a: tuple
    b: tuple
    gap: float
    station: float


@dataclass(frozen=True)
class GapEstimate:
    gap_px: float
    samples_used: int
    samples_trimmed: int


@dataclass(frozen=True)
class MeasureConfig:
    """Knobs of :func:`measure_diameter`.

    ``n_stations=None`` picks ``min(50, 80% of the overlapping axial
    extent)``.  ``min_area=None`` derives the component area threshold from
    ``min_area_frac`` of the image size.  ``height_method`` is ``"moments"``
    (second axial moment of the pad's central band) or ``"extent"`` (max
    minus min projection plus one).
    """

    n_stations: int = None
    trim: bool = True
    k_mad: float = 3.5
    min_area: int = None
    min_area_frac: float = 0.0005
    height_method: str = "moments"


@dataclass(frozen=True)
class MeasurementResult:
    gap_px: float
    pad_height_px: float
    pad_height_mm: float
    scale_mm_per_px: float
    diameter_mm: float
    samples_used: int
    samples_trimmed: int
    stations_reduced: bool = False
    axis: tuple = (0.0, 1.0)
    samples: tuple = field(default=(), repr=False)


def default_min_area(shape, frac=0.0005):
    return max(1, int(np.ceil(frac * shape[0] * shape[1])))


def _perp(axis):
    return np.array([axis[1], -axis[0]])


def _project(xy, v):
    return xy[:, 0] * v[0] + xy[:, 1] * v[1]


def extract_pad_regions(mask, min_area=None, min_area_frac=0.0005):
    """Return the two largest pad components as ``(left, right)``.

    "Left" is the component whose centroid comes first along the measurement
    direction of the larger component.
    """
    mask = check_mask(mask)
    if min_area is None:
        min_area = default_min_area(mask.shape, min_area_frac)
    labels, n = ndimage.label(mask, structure=_EIGHT)
    areas = np.bincount(labels.ravel(), minlength=n + 1)[1:]
    order = np.argsort(-areas, kind="stable")
    keep = [int(i) + 1 for i in order if areas[i] >= min_area]
    if len(keep) < 2:
        raise PadsNotFoundError(n, areas[order], min_area)
    regions = []
    for lab in keep[:2]:
        rows, cols = np.nonzero(labels == lab)
        regions.append(PadRegion(cols.astype(np.int64), rows.astype(np.int64), lab))
    big, small = regions
    origin = np.minimum(big.origin, small.origin)
    n_dir = _perp(big.principal_axis)
    pb = _project(big.local_xy(origin), n_dir).mean()
    ps = _project(small.local_xy(origin), n_dir).mean()
    return (big, small) if pb <= ps else (small, big)


def estimate_axis(region):
    """Unit principal axis of a region, vertical component >= 0.

    Raises :class:`AmbiguousAxisError` when the covariance eigenvalue ratio
    is below 1.5.
    """
    axis, ratio = region._axis_and_ratio
    if ratio < MIN_AXIS_RATIO:
        raise AmbiguousAxisError(ratio)
    return axis.copy()


def sample_edge_pairs(left, right, axis, n_stations=None):
    """Inner-edge point pairs at evenly spaced stations along ``axis``.

    Returns ``(samples, reduced)``.  At each station the pixels whose axial
    coordinate falls in ``[t - 0.5, t + 0.5)`` form the scan line; ``A`` is
    the left pad's pixel furthest along the measurement direction and ``B``
    the right pad's nearest one.  The gap is the distance between the
    facing pixel edges, ``s_B - s_A - 1``.  ``reduced`` is True when fewer
    stations than requested fit in the overlap.
    """
    axis = np.asarray(axis, dtype=np.float64)
    n_dir = _perp(axis)
    origin = np.minimum(left.origin, right.origin)
    L = left.local_xy(origin)
    R = right.local_xy(origin)
    tL, sL = _project(L, axis), _project(L, n_dir)
    tR, sR = _project(R, axis), _project(R, n_dir)
    lo = max(tL.min(), tR.min())
    hi = min(tL.max(), tR.max())
    if hi < lo:
        raise GeometryError("pads do not overlap along the axis", stage="sample")
    available = int(np.floor(hi - lo)) + 1
    if n_stations is None:
        n_stations = max(1, min(MAX_STATIONS, int(STATION_FRACTION * available)))
    if n_stations < 1:
        raise ValueError("n_stations must be >= 1")
    reduced = n_stations > available
    n = min(n_stations, available)
    offsets = np.floor((np.arange(n) + 0.5) * available / n)

    samples = []
    for t in lo + offsets:
        on_left = np.flatnonzero((tL >= t - 0.5) & (tL < t + 0.5))
        on_right = np.flatnonzero((tR >= t - 0.5) & (tR < t + 0.5))
        if on_left.size == 0 or on_right.size == 0:
            continue
        ia = on_left[np.argmax(sL[on_left])]
        ib = on_right[np.argmin(sR[on_right])]
        gap = float(sR[ib] - sL[ia] - 1.0)
        if gap <= 0:
            continue
        samples.append(EdgePairSample(
            a=(int(left.cols[ia]), int(left.rows[ia])),
            b=(int(right.cols[ib]), int(right.rows[ib])),
            gap=gap, station=float(t)))
    if not samples:
        raise GeometryError("no scan line crosses both pads with a positive gap", stage="sample")
    return samples, reduced


def mean_gap_pixels(samples, trim=True, k_mad=3.5):
    """Average gap over samples, optionally dropping median/MAD outliers.

    With ``trim=False`` this is the plain arithmetic mean.  With trimming a
    sample is dropped when ``|gap - median| > k_mad * MAD``; a zero MAD
    therefore keeps only the samples equal to the median.
    """
    gaps = np.array([s.gap if isinstance(s, EdgePairSample) else s for s in samples], dtype=np.float64)
    if gaps.size == 0:
        raise ValueError("no gap samples")
    if not trim:
        return GapEstimate(float(gaps.mean()), int(gaps.size), 0)
    med = np.median(gaps)
    dev = np.abs(gaps - med)
    keep = dev <= k_mad * np.median(dev)
    return GapEstimate(float(gaps[keep].mean()), int(keep.sum()), int(gaps.size - keep.sum()))


def pad_height_pixels(region, axis, method="moments"):
    """Length of a pad along ``axis`` in pixels (the calibration segment).

    ``"extent"`` is ``max - min + 1`` of the axial projections.  It is exact
    for axis-aligned pads but overshoots by up to a pixel on tilted ones,
    because pixel centres can sit arbitrarily close to a tilted end edge.
    ``"moments"`` instead cuts the central half of the pad's width (away
    from both long edges) into unit-wide strips parallel to the axis.  A
    strip holds about one pixel per unit length whatever the tilt, so its
    axial variance inverts to a length, ``sqrt(12 var + 1)`` (the ``+1``
    makes it exact on axis-aligned rasters).  The mean over strips is
    returned.
    """
    axis = np.asarray(axis, dtype=np.float64)
    xy = region.local_xy()
    t = _project(xy, axis)
    if method == "extent":
        return float(t.max() - t.min() + 1.0)
    if method != "moments":
        raise ValueError(f"unknown height method {method!r}")
    s = _project(xy, _perp(axis))
    s = s - s.min()
    q1, q3 = np.quantile(s, [0.25, 0.75])
    strip = np.floor(s).astype(np.int64)
    heights = []
    for k in np.unique(strip):
        if q1 <= k + 0.5 <= q3:
            tk = t[strip == k]
            if tk.size >= 2:
                heights.append(np.sqrt(12.0 * tk.var() + 1.0))
    if not heights:
        raise GeometryError("pad too thin to measure its height", stage="calibrate")
    return float(np.mean(heights))


def measure_diameter(mask, pad_height_mm, cfg=MeasureConfig()):
    """Full measurement on a pads mask.

    The axis and the calibration height both come from the larger pad.
    ``diameter_mm = gap_px * pad_height_mm / pad_height_px``.
    """
    if not pad_height_mm > 0:
        raise ValueError("pad_height_mm must be positive")
    mask = check_mask(mask)
    left, right = extract_pad_regions(mask, cfg.min_area, cfg.min_area_frac)
    ref = left if left.area >= right.area else right
    axis = estimate_axis(ref)
    samples, reduced = sample_edge_pairs(left, right, axis, cfg.n_stations)
    est = mean_gap_pixels(samples, trim=cfg.trim, k_mad=cfg.k_mad)
    height_px = pad_height_pixels(ref, axis, cfg.height_method)
    if not height_px > 0:
        raise GeometryError("pad height is zero", stage="calibrate")
    return MeasurementResult(
        gap_px=est.gap_px,
        pad_height_px=height_px,
        pad_height_mm=float(pad_height_mm),
        scale_mm_per_px=float(pad_height_mm) / height_px,
        diameter_mm=est.gap_px * float(pad_height_mm) / height_px,
        samples_used=est.samples_used,
        samples_trimmed=est.samples_trimmed,
        stations_reduced=reduced,
        axis=(float(axis[0]), float(axis[1])),
        samples=tuple(samples),
    )
