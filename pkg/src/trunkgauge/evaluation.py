"""Error statistics and the cross-luminosity experiment.

Standard deviations use the ``n - 1`` denominator (0 for a single value).
"""
from dataclasses import dataclass, field

import numpy as np

from ._validation import check_mask, check_rgb_image
from .exceptions import GeometryError
from .geometry import MeasureConfig, measure_diameter
from .segmentation import TrainConfig, classify_image, train_classifier
from .synth import SceneSpec, synth_scene

__all__ = [
    "ErrorStats", "Histogram", "RoundSummary", "LuminosityRow", "Scene",
    "error_stats", "error_histogram", "round_summary", "cross_condition_compare",
    "render_scenes", "run_luminosity_experiment",
]


def _sample_std(x):
    return float(np.std(x, ddof=1)) if x.size > 1 else 0.0


@dataclass(frozen=True, eq=False)
class ErrorStats:
    mean_abs_error: float
    std_abs_error: float
    max_abs_error: float
    count: int
    errors: np.ndarray = field(repr=False, default=None)

    def fraction_below(self, threshold):
        """Fraction of absolute errors strictly below ``threshold``."""
        return float(np.count_nonzero(self.errors < threshold)) / self.count


def error_stats(measured, reference):
    m = np.asarray(measured, dtype=np.float64).ravel()
    r = np.asarray(reference, dtype=np.float64).ravel()
    if m.shape != r.shape:
        raise ValueError(f"length mismatch: {m.size} measured vs {r.size} reference values")
    if m.size == 0:
        raise ValueError("no measurements")
    err = np.abs(m - r)
    return ErrorStats(float(err.mean()), _sample_std(err), float(err.max()), int(err.size), err)


@dataclass(frozen=True, eq=False)
class Histogram:
    bin_width: float
    edges: np.ndarray
    counts: np.ndarray

    @property
    def total(self):
        return int(self.counts.sum())

    def bins(self):
        """``[(lo, hi, count), ...]`` for every bin."""
        return [(float(lo), float(hi), int(c))
                for lo, hi, c in zip(self.edges[:-1], self.edges[1:], self.counts)]


def error_histogram(errors, bin_width=0.2):
    """Counts over half-open bins ``[k w, (k + 1) w)``.

    Edges are computed as ``k * w`` and bin membership is checked against
    those exact edges, so a value never lands in a bin that excludes it.
    """
    if not bin_width > 0:
        raise ValueError("bin_width must be positive")
    e = np.asarray(errors, dtype=np.float64).ravel()
    if e.size == 0:
        return Histogram(float(bin_width), np.zeros(0), np.zeros(0, dtype=np.int64))
    k = np.floor(e / bin_width).astype(np.int64)
    k -= e < k * bin_width
    k += e >= (k + 1) * bin_width
    k0, k1 = int(k.min()), int(k.max())
    counts = np.bincount(k - k0, minlength=k1 - k0 + 1)
    edges = np.arange(k0, k1 + 2) * bin_width
    return Histogram(float(bin_width), edges, counts)


@dataclass(frozen=True)
class RoundSummary:
    """Per-round statistics, highest mean error first.

    ``entries`` holds ``(round_id, ErrorStats)`` pairs.
    """

    entries: tuple

    @property
    def means(self):
        return [s.mean_abs_error for _, s in self.entries]

    @property
    def stds(self):
        return [s.std_abs_error for _, s in self.entries]


def round_summary(rounds):
    """Sort rounds by descending mean error, ties by descending std.

    ``rounds`` is a sequence of ``(measured, reference)`` pairs (round ids
    are their positions) or a mapping ``round_id -> (measured, reference)``.
    Rounds that tie on both keys keep their input order.
    """
    items = list(rounds.items()) if hasattr(rounds, "items") else list(enumerate(rounds))
    stats = []
    for rid, (measured, reference) in items:
        if len(measured) == 0:
            raise ValueError(f"round {rid!r} is empty")
        stats.append((rid, error_stats(measured, reference)))
    stats.sort(key=lambda e: (-e[1].mean_abs_error, -e[1].std_abs_error))
    return RoundSummary(tuple(stats))


def cross_condition_compare(diam_matched, diam_crossed):
    """``(mean, std)`` of ``|matched - crossed|`` over the same test images."""
    s = error_stats(diam_crossed, diam_matched)
    return s.mean_abs_error, s.std_abs_error


@dataclass(frozen=True, eq=False)
class Scene:
    image: np.ndarray
    mask: np.ndarray
    pad_height_mm: float
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "image", check_rgb_image(self.image))
        object.__setattr__(self, "mask", check_mask(self.mask))


def render_scenes(specs):
    scenes = []
    for i, spec in enumerate(specs):
        img, truth = synth_scene(spec)
        scenes.append(Scene(img, truth.mask, spec.pad_height_mm, f"scene{i:04d}"))
    return scenes


@dataclass(frozen=True)
class LuminosityRow:
    test_condition: str
    matched_model: str
    crossed_model: str
    mean_abs_diff_mm: float
    std_abs_diff_mm: float
    n_images: int
    n_failed: int


def _measure_all(scenes, model, measure_cfg):
    out = []
    for sc in scenes:
        try:
            mask = classify_image(sc.image, model)
            out.append(measure_diameter(mask, sc.pad_height_mm, measure_cfg).diameter_mm)
        except GeometryError:
            out.append(np.nan)
    return np.array(out)


def run_luminosity_experiment(bright, dim, train_count=4, train_cfg=TrainConfig(),
                              measure_cfg=MeasureConfig(), seed=0, names=("bright", "dim")):
    """Train one classifier per condition and compare matched vs crossed models.

    ``bright`` and ``dim`` are sequences of :class:`Scene` or
    :class:`~trunkgauge.synth.SceneSpec`.  From each set ``train_count``
    scenes are drawn at random (seeded) for training, the rest are
    measured under both models.  Rows come back dim condition first, then
    bright.  Images where either measurement fails are left out of the
    statistics and counted in ``n_failed``.
    """
    sets = []
    for group in (bright, dim):
        group = list(group)
        if group and isinstance(group[0], SceneSpec):
            group = render_scenes(group)
        if len(group) <= train_count:
            raise ValueError(f"need more than {train_count} scenes per condition, got {len(group)}")
        sets.append(group)

    rng = np.random.default_rng(seed)
    splits = []
    for group in sets:
        pick = np.zeros(len(group), dtype=bool)
        pick[rng.choice(len(group), size=train_count, replace=False)] = True
        splits.append(([s for s, p in zip(group, pick) if p],
                       [s for s, p in zip(group, pick) if not p]))
    models = [train_classifier([(s.image, s.mask) for s in train], train_cfg)
              for train, _ in splits]

    rows = []
    for test_i, other_i in ((1, 0), (0, 1)):
        test = splits[test_i][1]
        matched = _measure_all(test, models[test_i], measure_cfg)
        crossed = _measure_all(test, models[other_i], measure_cfg)
        ok = np.isfinite(matched) & np.isfinite(crossed)
        if ok.any():
            mean, std = cross_condition_compare(matched[ok], crossed[ok])
        else:
            mean = std = float("nan")
        rows.append(LuminosityRow(names[test_i], names[test_i], names[other_i],
                                  mean, std, int(ok.sum()), int((~ok).sum())))
    return rows
