"""File formats: images, masks, classifier model files and CSV records.

Model files are versioned JSON.  Floats are written with Python's shortest
round-trip representation, so write -> read -> write is byte-identical.
Masks are 8-bit single-channel PNGs, 0 = background and 255 = pads.
"""
import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ._validation import check_mask, check_rgb_image
from .exceptions import InvalidModelError
from .gmm import GmmModel
from .segmentation import ClassifierModel

__all__ = [
    "IMAGE_SUFFIXES", "MODEL_FORMAT", "MODEL_VERSION", "CAMPAIGN_FIELDS", "MANIFEST_FIELDS",
    "read_image", "write_image", "read_mask", "write_mask", "list_images",
    "model_to_dict", "model_from_dict", "dumps_model", "loads_model", "save_model", "load_model",
    "CampaignRow", "write_campaign", "read_campaign", "write_rows", "read_rows", "fmt_float",
]

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
MODEL_FORMAT = "trunkgauge-classifier"
MODEL_VERSION = 1
CAMPAIGN_FIELDS = ("image_id", "status", "gap_px", "pad_height_px", "pad_height_mm",
                   "diameter_mm", "samples_used", "samples_trimmed")
MANIFEST_FIELDS = ("image_id", "seed", "gap_px", "pad_height_px", "pad_height_mm",
                   "diameter_mm", "tilt_deg", "brightness", "edge_jitter")


def read_image(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def write_image(path, img):
    Image.fromarray(check_rgb_image(img)).save(path, format="PNG")


def read_mask(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("L")) > 127


def write_mask(path, mask):
    mask = check_mask(mask)
    Image.fromarray(np.where(mask, 255, 0).astype(np.uint8)).save(path, format="PNG")


def list_images(directory):
    return sorted(p for p in Path(directory).iterdir()
                  if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES)


def _plain(obj):
    # numpy scalars/arrays -> JSON-native values
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def _gmm_block(label, m):
    return {
        "label": label,
        "modes": m.n_components,
        "components": [
            {"weight": float(w), "mean": [float(mu[0]), float(mu[1])],
             "cov": [float(c[0, 0]), float(c[0, 1]), float(c[1, 0]), float(c[1, 1])]}
            for w, mu, c in zip(m.weights, m.means, m.covs)
        ],
    }


def model_to_dict(model):
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "colorspace": model.colorspace,
        "classes": [_gmm_block("pads", model.pads), _gmm_block("background", model.background)],
        "training": _plain(model.metadata),
    }


def _gmm_from_block(block):
    comps = block["components"]
    if len(comps) != block["modes"]:
        raise InvalidModelError(f"class {block['label']!r}: modes does not match component count")
    return GmmModel(
        weights=[c["weight"] for c in comps],
        means=[c["mean"] for c in comps],
        covs=[np.reshape(c["cov"], (2, 2)) for c in comps],
    )


def model_from_dict(d):
    try:
        if d["format"] != MODEL_FORMAT:
            raise InvalidModelError(f"not a {MODEL_FORMAT} file")
        if d["version"] != MODEL_VERSION:
            raise InvalidModelError(f"unsupported model version {d['version']!r}")
        blocks = {b["label"]: b for b in d["classes"]}
        return ClassifierModel(
            pads=_gmm_from_block(blocks["pads"]),
            background=_gmm_from_block(blocks["background"]),
            colorspace=d["colorspace"],
            metadata=d.get("training", {}),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, InvalidModelError):
            raise
        raise InvalidModelError(f"malformed model file: {exc}") from exc


def dumps_model(model):
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def loads_model(text):
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidModelError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(d)


def save_model(path, model):
    Path(path).write_text(dumps_model(model), encoding="utf-8")


def load_model(path):
    return loads_model(Path(path).read_text(encoding="utf-8"))


def fmt_float(x):
    return repr(float(x))


@dataclass(frozen=True)
class CampaignRow:
    """One measured image.  Numeric fields are None unless ``status == "ok"``."""

    image_id: str
    status: str
    gap_px: float = None
    pad_height_px: float = None
    pad_height_mm: float = None
    diameter_mm: float = None
    samples_used: int = None
    samples_trimmed: int = None

    def __post_init__(self):
        numeric = [getattr(self, f) for f in CAMPAIGN_FIELDS[2:]]
        if self.status == "ok" and any(v is None for v in numeric):
            raise ValueError("an ok row needs every numeric field")
        if self.status != "ok" and any(v is not None for v in numeric):
            raise ValueError("a failed row carries no numeric fields")

    @classmethod
    def from_result(cls, image_id, result):
        return cls(image_id, "ok", result.gap_px, result.pad_height_px, result.pad_height_mm,
                   result.diameter_mm, result.samples_used, result.samples_trimmed)

    def to_record(self):
        rec = {"image_id": self.image_id, "status": self.status}
        for f in CAMPAIGN_FIELDS[2:]:
            v = getattr(self, f)
            rec[f] = "" if v is None else (str(v) if isinstance(v, int) else fmt_float(v))
        return rec

    @classmethod
    def from_record(cls, rec):
        if rec["status"] != "ok":
            return cls(rec["image_id"], rec["status"])
        return cls(rec["image_id"], "ok",
                   float(rec["gap_px"]), float(rec["pad_height_px"]), float(rec["pad_height_mm"]),
                   float(rec["diameter_mm"]), int(rec["samples_used"]), int(rec["samples_trimmed"]))


def write_rows(path, fields, records):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        w.writeheader()
        for rec in records:
            w.writerow(rec)


def read_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def write_campaign(path, rows):
    write_rows(path, CAMPAIGN_FIELDS, (r.to_record() for r in rows))


def read_campaign(path):
    return [CampaignRow.from_record(rec) for rec in read_rows(path)]
