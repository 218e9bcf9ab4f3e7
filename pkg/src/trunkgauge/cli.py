"""``trunkgauge`` command line.

Exit codes: 0 ok, 2 usage or input error, 3 training failure, 4 every
measurement in the batch failed.
"""
import argparse
import sys
from pathlib import Path

import numpy as np

from . import io
from .evaluation import (Scene, error_histogram, error_stats, round_summary,
                         run_luminosity_experiment)
from .exceptions import (DegenerateDataError, FitFailedError, GeometryError,
                         InsufficientTrainingDataError, InvalidModelError, InvalidSceneError,
                         TrunkGaugeError)
from .geometry import MeasureConfig, measure_diameter
from .segmentation import TrainConfig, classify_image, train_classifier
from .synth import SceneSpec, synth_scene

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_TRAIN = 3
EXIT_MEASURE = 4

LUMINOSITY_FIELDS = ("test_condition", "matched_model", "crossed_model",
                     "mean_abs_diff_mm", "std_abs_diff_mm", "n_images", "n_failed")


class InputError(Exception):
    pass


def _err(msg):
    print(f"trunkgauge: error: {msg}", file=sys.stderr)


def _positive(kind):
    def parse(text):
        v = kind(text)
        if not v > 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return parse


def _pairs(images_dir, masks_dir):
    images_dir, masks_dir = Path(images_dir), Path(masks_dir)
    for d in (images_dir, masks_dir):
        if not d.is_dir():
            raise InputError(f"not a directory: {d}")
    images = {p.stem: p for p in io.list_images(images_dir)}
    masks = {p.stem: p for p in io.list_images(masks_dir)}
    if not images:
        raise InputError(f"no images in {images_dir}")
    unmatched = sorted(set(images) ^ set(masks))
    if unmatched:
        raise InputError("unmatched image/mask files: " + ", ".join(unmatched))
    return [(images[k], masks[k]) for k in sorted(images)]


def _print_fit(model):
    fit = model.metadata.get("fit", {})
    for name, gmm in (("pads", model.pads), ("background", model.background)):
        rep = fit.get(name, {})
        print(f"{name}: K={gmm.n_components} iterations={rep.get('n_iter')} "
              f"log_likelihood={rep.get('log_likelihood')!r} converged={rep.get('converged')}")
        for w, mu in zip(gmm.weights, gmm.means):
            print(f"  weight={w:.4f} mean=({mu[0]:.3f}, {mu[1]:.3f})")


def cmd_train(args):
    pairs = [(io.read_image(i), io.read_mask(m)) for i, m in _pairs(args.images, args.masks)]
    cfg = TrainConfig(pads_modes=args.pads_modes, bg_modes=args.bg_modes,
                      cap_per_class=args.cap, rel_tol=args.rel_tol,
                      max_iters=args.max_iters, seed=args.seed)
    try:
        model = train_classifier(pairs, cfg)
    except InsufficientTrainingDataError as exc:
        raise InputError(str(exc)) from exc
    except (FitFailedError, DegenerateDataError, ArithmeticError) as exc:
        _err(f"training failed: {exc}")
        return EXIT_TRAIN
    io.save_model(args.out, model)
    _print_fit(model)
    return EXIT_OK


def _load_model(path):
    try:
        return io.load_model(path)
    except (OSError, InvalidModelError) as exc:
        raise InputError(f"cannot read model {path}: {exc}") from exc


def cmd_segment(args):
    model = _load_model(args.model)
    try:
        img = io.read_image(args.image)
    except OSError as exc:
        raise InputError(f"cannot read image {args.image}: {exc}") from exc
    io.write_mask(args.out, classify_image(img, model, opening=args.open))
    return EXIT_OK


def cmd_measure(args):
    model = _load_model(args.model)
    src = Path(args.input)
    if src.is_dir():
        files = io.list_images(src)
    elif src.is_file():
        files = [src]
    else:
        raise InputError(f"no such file or directory: {src}")
    if not files:
        raise InputError(f"no images in {src}")
    cfg = MeasureConfig(n_stations=args.scanlines, trim=not args.no_trim,
                        min_area_frac=args.min_area_frac)
    rows = []
    for path in files:
        try:
            img = io.read_image(path)
        except OSError:
            rows.append(io.CampaignRow(path.stem, "read-error"))
            continue
        try:
            mask = classify_image(img, model, opening=args.open)
            res = measure_diameter(mask, args.pad_height_mm, cfg)
            rows.append(io.CampaignRow.from_result(path.stem, res))
        except GeometryError as exc:
            rows.append(io.CampaignRow(path.stem, exc.status))
    io.write_campaign(args.out, rows)
    n_ok = sum(r.status == "ok" for r in rows)
    print(f"measured {n_ok}/{len(rows)} images")
    return EXIT_OK if n_ok else EXIT_MEASURE


def _float_column(rows, key, path):
    out = {}
    for r in rows:
        if "image_id" not in r or key not in r:
            raise InputError(f"{path}: needs image_id and {key} columns")
        if r.get("status", "ok") != "ok":
            continue
        try:
            out[r["image_id"]] = float(r[key])
        except ValueError as exc:
            raise InputError(f"{path}: bad {key} for {r['image_id']!r}") from exc
    return out


def _read_csv(path):
    try:
        return io.read_rows(path)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _stat_lines(stats, thresholds):
    lines = [f"count {stats.count}",
             f"mean_abs_error_mm {stats.mean_abs_error!r}",
             f"std_abs_error_mm {stats.std_abs_error!r}",
             f"max_abs_error_mm {stats.max_abs_error!r}"]
    lines += [f"fraction_below {t!r} {stats.fraction_below(t)!r}" for t in thresholds]
    return lines


def cmd_evaluate(args):
    pred_rows = _read_csv(args.pred)
    pred = _float_column(pred_rows, "diameter_mm", args.pred)
    ref = _float_column(_read_csv(args.ref), "diameter_mm", args.ref)
    failed = sorted(r["image_id"] for r in pred_rows if r.get("status", "ok") != "ok")
    missing = sorted((set(pred) | set(failed)) ^ set(ref))
    if missing:
        raise InputError("image ids differ between prediction and reference: " + ", ".join(missing))
    ids = sorted(pred)
    if not ids:
        raise InputError("no successful measurements to evaluate")
    measured = np.array([pred[i] for i in ids])
    truth = np.array([ref[i] for i in ids])
    stats = error_stats(measured, truth)

    lines = ["# diameter error report", f"failed {len(failed)}"]
    lines += _stat_lines(stats, args.below)
    hist = error_histogram(stats.errors, args.hist_bin)
    lines.append("")
    lines.append(f"# histogram bin_width {hist.bin_width!r}")
    lines += [f"[{lo:.6g}, {hi:.6g}) {c}" for lo, hi, c in hist.bins()]
    if args.rounds:
        rounds = {}
        for r in _read_csv(args.rounds):
            if "image_id" not in r or "round" not in r:
                raise InputError(f"{args.rounds}: needs image_id and round columns")
            if r["image_id"] in pred:
                rounds.setdefault(r["round"], []).append(r["image_id"])
        summary = round_summary({k: ([pred[i] for i in v], [ref[i] for i in v])
                                 for k, v in rounds.items()})
        lines.append("")
        lines.append("# rounds (highest mean error first)")
        lines += [f"{rid} n={s.count} mean={s.mean_abs_error!r} std={s.std_abs_error!r}"
                  for rid, s in summary.entries]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(_stat_lines(stats, args.below)))
    return EXIT_OK


def _scene_specs(args):
    rng = np.random.default_rng(args.seed)
    seeds = rng.integers(0, 2**31 - 1, size=args.count)
    tilts = args.tilt_deg + rng.uniform(-args.tilt_spread, args.tilt_spread, size=args.count)
    return [SceneSpec(width=args.width, height=args.height, gap_px=args.gap_px,
                      pad_width_px=args.pad_w_px, pad_height_px=args.pad_h_px,
                      tilt_deg=float(t), edge_jitter=args.edge_jitter, brightness=args.brightness,
                      color_noise=args.noise, pad_height_mm=args.pad_height_mm, seed=int(s))
            for s, t in zip(seeds, tilts)]


def cmd_synth(args):
    specs = _scene_specs(args)
    out = Path(args.out)
    rendered = []
    try:
        for i, spec in enumerate(specs):
            rendered.append((f"scene{i:04d}", spec, *synth_scene(spec)))
    except InvalidSceneError as exc:
        raise InputError(f"invalid scene: {exc}") from exc
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "masks").mkdir(parents=True, exist_ok=True)
    records = []
    for name, spec, img, truth in rendered:
        io.write_image(out / "images" / f"{name}.png", img)
        io.write_mask(out / "masks" / f"{name}.png", truth.mask)
        records.append({
            "image_id": name, "seed": str(spec.seed),
            "gap_px": io.fmt_float(truth.gap_px), "pad_height_px": io.fmt_float(truth.pad_height_px),
            "pad_height_mm": io.fmt_float(truth.pad_height_mm),
            "diameter_mm": io.fmt_float(truth.diameter_mm),
            "tilt_deg": io.fmt_float(spec.tilt_deg), "brightness": io.fmt_float(spec.brightness),
            "edge_jitter": io.fmt_float(spec.edge_jitter),
        })
    io.write_rows(out / "manifest.csv", io.MANIFEST_FIELDS, records)
    print(f"wrote {len(records)} scenes to {out}")
    return EXIT_OK


def _read_scene_dir(path):
    path = Path(path)
    manifest = path / "manifest.csv"
    if not manifest.is_file():
        raise InputError(f"{path}: no manifest.csv")
    scenes = []
    for r in _read_csv(manifest):
        try:
            img = io.read_image(path / "images" / f"{r['image_id']}.png")
            mask = io.read_mask(path / "masks" / f"{r['image_id']}.png")
            scenes.append(Scene(img, mask, float(r["pad_height_mm"]), r["image_id"]))
        except (OSError, KeyError, ValueError) as exc:
            raise InputError(f"{path}: bad scene entry: {exc}") from exc
    return scenes


def cmd_luminosity(args):
    bright = _read_scene_dir(args.bright)
    dim = _read_scene_dir(args.dim)
    for name, group in (("bright", bright), ("dim", dim)):
        if len(group) <= args.train_count:
            raise InputError(f"{name} set has {len(group)} scenes, need more than {args.train_count}")
    try:
        rows = run_luminosity_experiment(bright, dim, args.train_count,
                                         TrainConfig(seed=args.seed), seed=args.seed)
    except (FitFailedError, DegenerateDataError, ArithmeticError) as exc:
        _err(f"training failed: {exc}")
        return EXIT_TRAIN
    records = []
    for r in rows:
        records.append({
            "test_condition": r.test_condition, "matched_model": r.matched_model,
            "crossed_model": r.crossed_model, "mean_abs_diff_mm": io.fmt_float(r.mean_abs_diff_mm),
            "std_abs_diff_mm": io.fmt_float(r.std_abs_diff_mm),
            "n_images": str(r.n_images), "n_failed": str(r.n_failed),
        })
        print(f"{r.test_condition} images: matched {r.matched_model} vs crossed "
              f"{r.crossed_model} mean {r.mean_abs_diff_mm:.4f} mm std {r.std_abs_diff_mm:.4f} mm")
    io.write_rows(args.out, LUMINOSITY_FIELDS, records)
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every stochastic stage")

    parser = argparse.ArgumentParser(prog="trunkgauge", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[common], help="fit the pads/background colour models")
    p.add_argument("--images", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--pads-modes", type=_positive(int), default=2)
    p.add_argument("--bg-modes", type=_positive(int), default=3)
    p.add_argument("--cap", type=_positive(int), default=200_000)
    p.add_argument("--rel-tol", type=_positive(float), default=1e-6)
    p.add_argument("--max-iters", type=_positive(int), default=500)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("segment", parents=[common], help="write the pads mask of one image")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--open", action="store_true", help="apply a 3x3 binary opening")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("measure", parents=[common], help="measure trunk diameters")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="image file or directory")
    p.add_argument("--pad-height-mm", type=_positive(float), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scanlines", type=_positive(int), default=None,
                   help="scan lines per image (default: up to 50)")
    p.add_argument("--no-trim", action="store_true")
    p.add_argument("--min-area-frac", type=float, default=0.0005)
    p.add_argument("--open", action="store_true")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("evaluate", parents=[common], help="compare measurements with reference values")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--hist-bin", type=_positive(float), default=0.2)
    p.add_argument("--rounds", default=None, help="CSV with image_id,round columns")
    p.add_argument("--below", type=float, nargs="*", default=[0.5, 1.0, 2.0],
                   help="report the fraction of errors below these values")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("synth", parents=[common], help="render synthetic clamp scenes")
    p.add_argument("--count", type=_positive(int), required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--gap-px", type=float, default=300.0)
    p.add_argument("--pad-h-px", type=float, default=200.0)
    p.add_argument("--pad-w-px", type=float, default=40.0)
    p.add_argument("--tilt-deg", type=float, default=0.0)
    p.add_argument("--tilt-spread", type=float, default=0.0,
                   help="draw each tilt uniformly within +/- this many degrees of --tilt-deg")
    p.add_argument("--edge-jitter", type=float, default=0.0)
    p.add_argument("--brightness", type=float, default=1.0)
    p.add_argument("--width", type=_positive(int), default=640)
    p.add_argument("--height", type=_positive(int), default=480)
    p.add_argument("--noise", type=float, default=6.0)
    p.add_argument("--pad-height-mm", type=float, default=20.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("luminosity", parents=[common], help="matched vs crossed model comparison")
    p.add_argument("--bright", required=True)
    p.add_argument("--dim", required=True)
    p.add_argument("--train-count", type=_positive(int), default=4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_luminosity)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        _err(str(exc))
        return EXIT_INPUT
    except (TrunkGaugeError, ValueError, OSError) as exc:
        _err(str(exc))
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
