"""Two-class (pads / background) colour classifier.

Training routes every labelled pixel's u*v* value into one dataset per
class and fits one mixture per class.  A pixel is labelled pads when the
pads mixture assigns it a strictly higher likelihood than the background
mixture (equal class priors; exact ties go to background).
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_mask, check_rgb_image, check_uv_points
from .color import COLORSPACE_TAG, image_to_uv, rgb_to_uv
from .exceptions import DimensionError, InsufficientTrainingDataError, InvalidModelError
from .gmm import FitConfig, GmmModel, em_fit, gmm_log_density

__all__ = [
    "BACKGROUND", "PADS", "LabeledImagePair", "TrainConfig", "ClassifierModel",
    "build_training_sets", "fit_class_models", "train_classifier",
    "classify_pixel", "classify_uv", "classify_image", "PadSegmenter",
]

BACKGROUND = 0
PADS = 1


@dataclass(frozen=True, eq=False)
class LabeledImagePair:
    image: np.ndarray
    mask: np.ndarray

    def __post_init__(self):
        img = check_rgb_image(self.image)
        mask = check_mask(self.mask)
        if mask.shape != img.shape[:2]:
            raise DimensionError(f"mask {mask.shape} does not match image {img.shape[:2]}")
        object.__setattr__(self, "image", img)
        object.__setattr__(self, "mask", mask)


@dataclass(frozen=True)
class TrainConfig:
    pads_modes: int = 2
    bg_modes: int = 3
    cap_per_class: int = 200_000
    rel_tol: float = 1e-6
    max_iters: int = 500
    reg_eps: float = 1e-6
    seed: int = 0

    def fit_config(self, modes):
        return FitConfig(modes, self.rel_tol, self.max_iters, self.reg_eps, self.seed)


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    pads: GmmModel
    background: GmmModel
    colorspace: str = COLORSPACE_TAG
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.pads, GmmModel) or not isinstance(self.background, GmmModel):
            raise InvalidModelError("both class models must be GmmModel instances")
        if self.colorspace != COLORSPACE_TAG:
            raise InvalidModelError(f"unsupported colour space {self.colorspace!r}")

    def __eq__(self, other):
        if not isinstance(other, ClassifierModel):
            return NotImplemented
        return (self.pads == other.pads and self.background == other.background
                and self.colorspace == other.colorspace and self.metadata == other.metadata)

    __hash__ = None


def _subsample(X, cap, rng):
    if X.shape[0] <= cap:
        return X
    idx = np.sort(rng.choice(X.shape[0], size=cap, replace=False))
    return X[idx]


def build_training_sets(pairs, cap_per_class=200_000, seed=0):
    """Split labelled pixels into ``(pads_uv, background_uv)`` arrays.

    Classes larger than ``cap_per_class`` are uniformly subsampled with a
    generator seeded from ``seed`` (one independent stream per class).
    """
    pairs = [p if isinstance(p, LabeledImagePair) else LabeledImagePair(*p) for p in pairs]
    if not pairs:
        raise InsufficientTrainingDataError("no labelled images given")
    pads, bg = [], []
    for pair in pairs:
        uv = image_to_uv(pair.image)
        pads.append(uv[pair.mask])
        bg.append(uv[~pair.mask])
    pads = np.concatenate(pads)
    bg = np.concatenate(bg)
    for name, arr in (("pads", pads), ("background", bg)):
        if arr.shape[0] == 0:
            raise InsufficientTrainingDataError(f"no {name} pixels in the training masks")
    pads = _subsample(pads, cap_per_class, np.random.default_rng([seed, PADS]))
    bg = _subsample(bg, cap_per_class, np.random.default_rng([seed, BACKGROUND]))
    return pads, bg


def _report_dict(report):
    return {"n_iter": report.n_iter, "log_likelihood": report.log_likelihood,
            "converged": report.converged, "n_reinit": len(report.reinit_iters)}


def fit_class_models(pads_uv, bg_uv, cfg=TrainConfig(), metadata=None):
    pads_model, pads_report = em_fit(pads_uv, cfg.fit_config(cfg.pads_modes))
    bg_model, bg_report = em_fit(bg_uv, cfg.fit_config(cfg.bg_modes))
    meta = dict(metadata or {})
    meta.update({
        "seed": cfg.seed,
        "pixels_used": {"pads": int(len(pads_uv)), "background": int(len(bg_uv))},
        "fit": {"pads": _report_dict(pads_report), "background": _report_dict(bg_report)},
    })
    return ClassifierModel(pads_model, bg_model, COLORSPACE_TAG, meta)


def train_classifier(pairs, cfg=TrainConfig()):
    """Fit the pads and background mixtures from labelled images."""
    pairs = [p if isinstance(p, LabeledImagePair) else LabeledImagePair(*p) for p in pairs]
    pads, bg = build_training_sets(pairs, cfg.cap_per_class, cfg.seed)
    counts = {"pads": int(sum(p.mask.sum() for p in pairs)),
              "background": int(sum((~p.mask).sum() for p in pairs))}
    return fit_class_models(pads, bg, cfg, {"n_images": len(pairs), "pixel_counts": counts})


def classify_uv(uv, m):
    """Vector of labels (``PADS`` / ``BACKGROUND``) for ``(n, 2)`` UV points."""
    X = check_uv_points(uv)
    return np.where(gmm_log_density(X, m.pads) > gmm_log_density(X, m.background),
                    PADS, BACKGROUND)


def classify_pixel(x, m):
    return int(classify_uv(np.asarray(x, dtype=np.float64).reshape(1, 2), m)[0])


def classify_image(img, m, opening=False):
    """Boolean mask (True = pads) with the image's height and width.

    ``opening=True`` applies a 3x3 binary opening to the raw per-pixel result.
    """
    img = check_rgb_image(img)
    packed = (img[..., 0].astype(np.uint32) << 16) | (img[..., 1].astype(np.uint32) << 8) | img[..., 2]
    colors, inverse = np.unique(packed.ravel(), return_inverse=True)
    rgb = np.stack([(colors >> 16) & 255, (colors >> 8) & 255, colors & 255], axis=-1)
    labels = classify_uv(rgb_to_uv(rgb.astype(np.uint8)), m)
    mask = (labels[inverse.ravel()] == PADS).reshape(img.shape[:2])
    if opening:
        mask = ndimage.binary_opening(mask, structure=np.ones((3, 3), bool))
    return mask


class PadSegmenter(ClassifierMixin, BaseEstimator):
    """Per-pixel pads/background classifier.

    Samples are pixels: ``X`` is an ``(n_pixels, 3)`` array of 8-bit RGB
    values and ``y`` holds 1 for pads, 0 for background.  Whole labelled
    images go through :meth:`fit_images`, whole images are segmented with
    :meth:`segment`.
    """

    def __init__(self, pads_modes=2, bg_modes=3, cap_per_class=200_000, rel_tol=1e-6,
                 max_iter=500, reg_eps=1e-6, random_state=0, opening=False):
        self.pads_modes = pads_modes
        self.bg_modes = bg_modes
        self.cap_per_class = cap_per_class
        self.rel_tol = rel_tol
        self.max_iter = max_iter
        self.reg_eps = reg_eps
        self.random_state = random_state
        self.opening = opening

    def _train_config(self):
        seed = 0 if self.random_state is None else int(self.random_state)
        return TrainConfig(self.pads_modes, self.bg_modes, self.cap_per_class,
                           self.rel_tol, self.max_iter, self.reg_eps, seed)

    def _set_model(self, model):
        self.model_ = model
        self.classes_ = np.array([BACKGROUND, PADS])
        self.n_features_in_ = 3
        return self

    def fit(self, X, y):
        X = np.asarray(X)
        y = np.asarray(y).ravel()
        if X.ndim != 2 or X.shape[1] != 3 or X.shape[0] != y.shape[0]:
            raise DimensionError("X must be (n_pixels, 3) with one label per row")
        # one row image keeps the training path identical to fit_images
        pair = LabeledImagePair(X.reshape(1, -1, 3), (y == PADS).reshape(1, -1))
        cfg = self._train_config()
        return self._set_model(train_classifier([pair], cfg))

    def fit_images(self, images, masks):
        pairs = [LabeledImagePair(i, m) for i, m in zip(images, masks, strict=True)]
        return self._set_model(train_classifier(pairs, self._train_config()))

    @classmethod
    def from_model(cls, model, **params):
        return cls(**params)._set_model(model)

    def decision_function(self, X):
        """Log-likelihood ratio ``log p(x | pads) - log p(x | background)``."""
        check_is_fitted(self, "model_")
        uv = rgb_to_uv(np.asarray(X, dtype=np.uint8))
        return gmm_log_density(uv, self.model_.pads) - gmm_log_density(uv, self.model_.background)

    def predict(self, X):
        check_is_fitted(self, "model_")
        return classify_uv(rgb_to_uv(np.asarray(X, dtype=np.uint8)), self.model_)

    def segment(self, image):
        check_is_fitted(self, "model_")
        return classify_image(image, self.model_, opening=self.opening)
