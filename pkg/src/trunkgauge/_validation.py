"""Input validation helpers shared by the estimators and functional API."""
import numpy as np

from .exceptions import DimensionError


def check_rgb_image(img):
    """Return ``img`` as a C-contiguous ``(H, W, 3)`` uint8 array."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3:
        raise DimensionError(f"expected an (H, W, 3) RGB raster, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DimensionError("image is empty")
    if img.dtype != np.uint8:
        if np.issubdtype(img.dtype, np.integer) and img.min() >= 0 and img.max() <= 255:
            img = img.astype(np.uint8)
        else:
            raise DimensionError(f"expected 8-bit channels, got dtype {img.dtype}")
    return np.ascontiguousarray(img)


def check_mask(mask):
    """Return ``mask`` as a 2-D boolean array (True = pads)."""
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.shape[0] < 1 or mask.shape[1] < 1:
        raise DimensionError(f"expected a non-empty 2-D mask, got shape {mask.shape}")
    if mask.dtype != bool:
        values = np.unique(mask)
        if not np.all(np.isin(values, (0, 1, 255))):
            raise DimensionError(f"mask must be binary, found values {values[:8]}")
        mask = mask > 0
    return mask


def check_uv_points(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1 and X.shape[0] == 2:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != 2:
        raise DimensionError(f"expected (n, 2) UV points, got shape {X.shape}")
    if X.shape[0] == 0:
        raise DimensionError("no data points")
    if not np.all(np.isfinite(X)):
        raise DimensionError("UV points must be finite")
    return X
