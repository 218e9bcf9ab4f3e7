"""sRGB to CIE 1976 u*v* chromaticity (luminance discarded).

Pixels are gamma-decoded with the IEC 61966-2-1 transfer curve, mapped to
XYZ with the sRGB/D65 primaries and projected to L*u*v*.  Only ``(u*, v*)``
is kept; L* is used internally as the chroma scale and then dropped.

The white point is taken as the XYZ image of sRGB (1, 1, 1) under the same
matrix, so white and every gray pixel land on (0, 0) up to rounding.
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_rgb_image
from .exceptions import DimensionError

__all__ = ["srgb_to_uv", "rgb_to_uv", "image_to_uv", "srgb_decode", "srgb_encode",
           "UvTransformer", "COLORSPACE_TAG"]

COLORSPACE_TAG = "cieluv-uv/srgb-d65"

# IEC 61966-2-1 forward matrix (linear sRGB -> XYZ, Y of white = 1)
SRGB_TO_XYZ = np.array([
    [0.4124, 0.3576, 0.1805],
    [0.2126, 0.7152, 0.0722],
    [0.0193, 0.1192, 0.9505],
])
WHITE_XYZ = SRGB_TO_XYZ.sum(axis=1)
_WHITE_DENOM = WHITE_XYZ[0] + 15.0 * WHITE_XYZ[1] + 3.0 * WHITE_XYZ[2]
WHITE_U = 4.0 * WHITE_XYZ[0] / _WHITE_DENOM
WHITE_V = 9.0 * WHITE_XYZ[1] / _WHITE_DENOM

_EPSILON = (6.0 / 29.0) ** 3
_KAPPA = (29.0 / 3.0) ** 3


def srgb_decode(c):
    """Gamma-decode sRGB values in [0, 1] to linear light."""
    c = np.asarray(c, dtype=np.float64)
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def srgb_encode(lin):
    """Inverse of :func:`srgb_decode` for linear values in [0, 1]."""
    lin = np.clip(np.asarray(lin, dtype=np.float64), 0.0, 1.0)
    return np.where(lin <= 0.0031308, 12.92 * lin, 1.055 * lin ** (1.0 / 2.4) - 0.055)


_DECODE_LUT = srgb_decode(np.arange(256) / 255.0)


def rgb_to_uv(rgb):
    """Vectorised conversion of ``(..., 3)`` uint8 RGB to ``(..., 2)`` u*v*.

    Every operation is element-wise, so the value for a pixel does not depend
    on the array it is embedded in.
    """
    rgb = np.asarray(rgb)
    if rgb.shape[-1:] != (3,):
        raise DimensionError(f"last axis must hold 3 channels, got shape {rgb.shape}")
    lin = _DECODE_LUT[rgb.astype(np.intp, copy=False)]
    r, g, b = lin[..., 0], lin[..., 1], lin[..., 2]
    m = SRGB_TO_XYZ
    X = m[0, 0] * r + m[0, 1] * g + m[0, 2] * b
    Y = m[1, 0] * r + m[1, 1] * g + m[1, 2] * b
    Z = m[2, 0] * r + m[2, 1] * g + m[2, 2] * b

    yr = Y / WHITE_XYZ[1]
    L = np.where(yr > _EPSILON, 116.0 * np.cbrt(yr) - 16.0, _KAPPA * yr)
    denom = X + 15.0 * Y + 3.0 * Z
    black = denom <= 0.0
    safe = np.where(black, 1.0, denom)
    u = 13.0 * L * (4.0 * X / safe - WHITE_U)
    v = 13.0 * L * (9.0 * Y / safe - WHITE_V)
    out = np.stack([u, v], axis=-1)
    out[black] = 0.0
    return out


def srgb_to_uv(p):
    """Chromaticity ``(u*, v*)`` of one 8-bit sRGB triple."""
    r, g, b = (int(c) for c in p)
    for c in (r, g, b):
        if not 0 <= c <= 255:
            raise ValueError(f"channel value {c} outside [0, 255]")
    u, v = rgb_to_uv(np.array([[r, g, b]], dtype=np.uint8))[0]
    return float(u), float(v)


def image_to_uv(img):
    """Per-pixel u*v* plane, shape ``(H, W, 2)``, of an ``(H, W, 3)`` image."""
    img = check_rgb_image(img)
    # distinct colours are converted once; the map is element-wise so this
    # is bit-identical to converting every pixel
    packed = (img[..., 0].astype(np.uint32) << 16) | (img[..., 1].astype(np.uint32) << 8) | img[..., 2]
    colors, inverse = np.unique(packed.ravel(), return_inverse=True)
    rgb = np.stack([(colors >> 16) & 255, (colors >> 8) & 255, colors & 255], axis=-1)
    uv = rgb_to_uv(rgb.astype(np.uint8))
    return uv[inverse.ravel()].reshape(img.shape[0], img.shape[1], 2)


class UvTransformer(TransformerMixin, BaseEstimator):
    """Stateless transformer mapping ``(n_samples, 3)`` RGB rows to u*v* rows."""

    def fit(self, X, y=None):
        return self

    def transform(self, X):
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != 3:
            raise DimensionError(f"expected (n_samples, 3) RGB rows, got shape {X.shape}")
        if X.dtype != np.uint8:
            if X.size and (X.min() < 0 or X.max() > 255):
                raise DimensionError("RGB rows must be 8-bit values")
            X = X.astype(np.uint8)
        return rgb_to_uv(X)
