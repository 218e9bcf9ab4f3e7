"""Trunk diameter from a photo of a red-padded calibration clamp."""
from .color import COLORSPACE_TAG, UvTransformer, image_to_uv, rgb_to_uv, srgb_to_uv
from .evaluation import (ErrorStats, Histogram, LuminosityRow, RoundSummary, Scene,
                         cross_condition_compare, error_histogram, error_stats,
                         round_summary, run_luminosity_experiment)
from .exceptions import (AmbiguousAxisError, FitFailedError, GeometryError, InvalidModelError,
                         PadsNotFoundError, TrunkGaugeError)
from .geometry import (MeasureConfig, MeasurementResult, estimate_axis, extract_pad_regions,
                       mean_gap_pixels, measure_diameter, pad_height_pixels, sample_edge_pairs)
from .gmm import (FitConfig, GaussianComponent, GaussianMixtureEM, GmmModel, em_fit,
                  gaussian_pdf, gmm_log_density, init_model, log_likelihood, m_step,
                  responsibilities)
from .pipeline import TrunkGauge
from .segmentation import (ClassifierModel, PadSegmenter, TrainConfig, classify_image,
                           classify_pixel, train_classifier)
from .synth import SceneSpec, synth_scene

__version__ = "0.1.0"
