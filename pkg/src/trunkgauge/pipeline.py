"""End-to-end estimator: labelled photos in, trunk diameters out."""
import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import GeometryError
from .geometry import MeasureConfig, measure_diameter
from .segmentation import PadSegmenter

__all__ = ["TrunkGauge"]


class TrunkGauge(BaseEstimator):
    """Segment the clamp pads and measure the trunk between them.

    ``fit(images, masks)`` trains the colour classifier on manually
    segmented photos; ``predict(images)`` returns diameters in millimetres
    (NaN where the pads cannot be measured).

    Parameters
    ----------
    pad_height_mm : float
        Physical length of a pad along its long side.
    n_stations : int or None
        Scan lines per image; None picks min(50, 80% of the overlap).
    trim : bool
        Drop gap samples further than ``k_mad`` MADs from the median.
    """

    def __init__(self, pad_height_mm=20.0, pads_modes=2, bg_modes=3, cap_per_class=200_000,
                 random_state=0, n_stations=None, trim=True, k_mad=3.5,
                 min_area_frac=0.0005, opening=False):
        self.pad_height_mm = pad_height_mm
        self.pads_modes = pads_modes
        self.bg_modes = bg_modes
        self.cap_per_class = cap_per_class
        self.random_state = random_state
        self.n_stations = n_stations
        self.trim = trim
        self.k_mad = k_mad
        self.min_area_frac = min_area_frac
        self.opening = opening

    def _measure_config(self):
        return MeasureConfig(n_stations=self.n_stations, trim=self.trim, k_mad=self.k_mad,
                             min_area_frac=self.min_area_frac)

    def fit(self, images, masks):
        self.segmenter_ = PadSegmenter(
            pads_modes=self.pads_modes, bg_modes=self.bg_modes,
            cap_per_class=self.cap_per_class, random_state=self.random_state,
            opening=self.opening,
        ).fit_images(images, masks)
        return self

    def measure(self, image):
        """Full :class:`~trunkgauge.geometry.MeasurementResult` for one photo."""
        check_is_fitted(self, "segmenter_")
        mask = self.segmenter_.segment(image)
        return measure_diameter(mask, self.pad_height_mm, self._measure_config())

    def predict(self, images):
        out = []
        for img in images:
            try:
                out.append(self.measure(img).diameter_mm)
            except GeometryError:
                out.append(np.nan)
        return np.array(out)
