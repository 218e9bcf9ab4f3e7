"""Synthetic clamp scenes with pixel-exact ground truth.

A scene is a trunk running along the clamp axis, two red pads gripping it,
and a mottled background of sky, soil and foliage patches.  Geometry is
defined in a frame centred on the clamp: ``t`` along the pads' long axis,
``s`` across the gap.  Pixel ``(col, row)`` is sampled at its centre
``(col + 0.5, row + 0.5)``.  Every band is half-open, ``[lo, hi)``, so a
band of integer width covers exactly that many pixel centres.

Edge jitter displaces each pad's inner edge by a random profile along the
axis (positive values push the pad into the gap), imitating the corrupted
band where segmentation of a real pad edge is unreliable.  Profile values
are drawn uniformly in ``[-edge_jitter / 2, edge_jitter / 2]`` at nodes
every ``jitter_period`` pixels and interpolated linearly in between, so the
gap seen by any scan line deviates from nominal by at most ``edge_jitter``.
The nominal ``gap_px`` stays the ground-truth diameter.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .color import srgb_decode, srgb_encode
from .exceptions import InvalidSceneError

__all__ = ["SceneSpec", "SceneTruth", "synth_scene", "DEFAULT_PALETTE"]

DEFAULT_PALETTE = (
    (160, 190, 225),  # sky
    (125, 100, 75),   # soil
    (70, 120, 45),    # foliage
    (40, 75, 35),     # shaded foliage
    (170, 160, 110),  # dry grass
)


@dataclass(frozen=True)
class SceneSpec:
    width: int = 640
    height: int = 480
    gap_px: float = 300.0
    pad_width_px: float = 40.0
    pad_height_px: float = 200.0
    tilt_deg: float = 0.0
    offset: tuple = (0.0, 0.0)
    pad_color: tuple = (200, 30, 35)
    trunk_color: tuple = (120, 100, 80)
    palette: tuple = DEFAULT_PALETTE
    n_patches: int = 12
    color_noise: float = 6.0
    edge_jitter: float = 0.0
    jitter_period: float = 8.0
    jitter_quantum: float = 0.0
    brightness: float = 1.0
    pad_height_mm: float = 20.0
    seed: int = 0

    def scaled(self, factor):
        """Same scene with every length multiplied by ``factor``."""
        return replace(
            self,
            width=int(round(self.width * factor)),
            height=int(round(self.height * factor)),
            gap_px=self.gap_px * factor,
            pad_width_px=self.pad_width_px * factor,
            pad_height_px=self.pad_height_px * factor,
            offset=(self.offset[0] * factor, self.offset[1] * factor),
            edge_jitter=self.edge_jitter * factor,
            jitter_period=self.jitter_period * factor,
        )

    @property
    def diameter_mm(self):
        return self.gap_px * self.pad_height_mm / self.pad_height_px


@dataclass(frozen=True, eq=False)
class SceneTruth:
    gap_px: float
    pad_height_px: float
    pad_height_mm: float
    diameter_mm: float
    mask: np.ndarray = field(repr=False)
    pad_areas: tuple = ()
    row_gaps: np.ndarray = field(default=None, repr=False)


def _validate(spec):
    if spec.width < 1 or spec.height < 1:
        raise InvalidSceneError("image dimensions must be positive")
    for name in ("gap_px", "pad_width_px", "pad_height_px", "pad_height_mm"):
        if not getattr(spec, name) > 0:
            raise InvalidSceneError(f"{name} must be positive")
    if spec.edge_jitter < 0 or spec.color_noise < 0 or not spec.brightness > 0:
        raise InvalidSceneError("edge_jitter and color_noise must be >= 0, brightness > 0")
    if spec.edge_jitter >= spec.pad_width_px or spec.edge_jitter >= spec.gap_px:
        raise InvalidSceneError("edge jitter must be smaller than the pad width and the gap")
    if not spec.jitter_period > 0:
        raise InvalidSceneError("jitter_period must be positive")
    th = np.radians(spec.tilt_deg)
    a = np.array([np.sin(th), np.cos(th)])
    n = np.array([np.cos(th), -np.sin(th)])
    c = np.array([spec.width / 2 + spec.offset[0], spec.height / 2 + spec.offset[1]])
    half_s = spec.gap_px / 2 + spec.pad_width_px
    half_t = spec.pad_height_px / 2
    for ss in (-half_s, half_s):
        for tt in (-half_t, half_t):
            x, y = c + ss * n + tt * a
            if not (0 <= x <= spec.width and 0 <= y <= spec.height):
                raise InvalidSceneError("pads extend outside the frame")


def synth_scene(spec):
    """Render ``spec``; returns ``(image, truth)``.  Deterministic per seed."""
    _validate(spec)
    rng = np.random.default_rng(spec.seed)
    H, W = spec.height, spec.width
    th = np.radians(spec.tilt_deg)
    cx = W / 2 + spec.offset[0]
    cy = H / 2 + spec.offset[1]
    py, px = np.mgrid[0:H, 0:W].astype(np.float64)
    px += 0.5 - cx
    py += 0.5 - cy
    t = px * np.sin(th) + py * np.cos(th)
    s = px * np.cos(th) - py * np.sin(th)

    G, Wp, Hp = spec.gap_px, spec.pad_width_px, spec.pad_height_px
    n_bins = int(np.ceil(Hp))
    n_nodes = int(np.ceil(Hp / spec.jitter_period)) + 1
    nodes_t = -Hp / 2 + spec.jitter_period * np.arange(n_nodes)
    half = spec.edge_jitter / 2
    if half > 0:
        nodes_l = rng.uniform(-half, half, n_nodes)
        nodes_r = rng.uniform(-half, half, n_nodes)
    else:
        nodes_l = nodes_r = np.zeros(n_nodes)

    def profile(nodes, tt):
        j = np.interp(tt, nodes_t, nodes)
        if spec.jitter_quantum > 0:
            j = np.round(j / spec.jitter_quantum) * spec.jitter_quantum
        return j

    along = (t >= -Hp / 2) & (t < Hp / 2)
    left = along & (s >= -G / 2 - Wp) & (s < -G / 2 + profile(nodes_l, t))
    right = along & (s >= G / 2 - profile(nodes_r, t)) & (s < G / 2 + Wp)
    bin_centres = -Hp / 2 + np.arange(n_bins) + 0.5
    row_gaps = G - profile(nodes_l, bin_centres) - profile(nodes_r, bin_centres)
    mask = left | right

    # background: Voronoi patches over the frame, trunk band, then pads
    seeds = rng.uniform([0, 0], [W, H], size=(spec.n_patches, 2))
    colors = rng.integers(0, len(spec.palette), size=spec.n_patches)
    gx = px + cx
    gy = py + cy
    nearest = np.zeros((H, W), dtype=np.int64)
    best = np.full((H, W), np.inf)
    for i, (sx, sy) in enumerate(seeds):
        d = (gx - sx) ** 2 + (gy - sy) ** 2
        closer = d < best
        best[closer] = d[closer]
        nearest[closer] = i
    palette = np.asarray(spec.palette, dtype=np.float64)
    base = palette[colors[nearest]]
    base[(s >= -G / 2) & (s < G / 2)] = spec.trunk_color
    base[mask] = spec.pad_color

    lin = srgb_decode(base / 255.0) * spec.brightness
    rgb = srgb_encode(lin) * 255.0
    if spec.color_noise > 0:
        rgb = rgb + rng.normal(0.0, spec.color_noise, size=rgb.shape)
    image = np.clip(np.rint(rgb), 0, 255).astype(np.uint8)

    truth = SceneTruth(
        gap_px=float(G),
        pad_height_px=float(Hp),
        pad_height_mm=float(spec.pad_height_mm),
        diameter_mm=spec.diameter_mm,
        mask=mask,
        pad_areas=(int(left.sum()), int(right.sum())),
        row_gaps=row_gaps,
    )
    return image, truth
