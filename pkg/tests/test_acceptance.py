"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear in the
summary) or directly with ``python tests/test_acceptance.py``.
"""
import csv
import math
import time
from itertools import permutations

import numpy as np
import pytest

from oracles import histogram_scalar, mean_scalar, random_gmm, sample_gmm, std_scalar
from trunkgauge.color import srgb_to_uv, rgb_to_uv
from trunkgauge.evaluation import (cross_condition_compare, error_histogram, error_stats,
                                   round_summary, run_luminosity_experiment)
from trunkgauge.geometry import (extract_pad_regions, estimate_axis, mean_gap_pixels,
                                 measure_diameter, sample_edge_pairs)
from trunkgauge.gmm import (FitConfig, GmmModel, component_log_prob, em_fit, init_model,
                            responsibilities)
from trunkgauge.segmentation import (ClassifierModel, TrainConfig, classify_image,
                                     classify_pixel, train_classifier)
from trunkgauge.synth import SceneSpec, synth_scene

RESULTS = []


def report(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    RESULTS.append(line)
    print(line)
    return ok


def _random_dataset(rng):
    k_true = int(rng.integers(1, 4))
    m = random_gmm(rng, k=k_true, spread=20.0)
    return sample_gmm(rng, m, 500)


# 1 ---------------------------------------------------------------------------

def test_c01_em_monotone():
    rng = np.random.default_rng(20240101)
    t0 = time.perf_counter()
    worst, n_bad, iters = 0.0, 0, 0
    for i in range(1000):
        X = _random_dataset(rng)
        _, rep = em_fit(X, FitConfig(n_components=1 + i % 3, seed=i))
        d = np.diff(rep.trace)
        worst = min(worst, float(d.min(initial=0.0)))
        n_bad += int(np.any(d < -1e-9))
        iters += rep.n_iter
    dt = time.perf_counter() - t0
    ok = n_bad == 0 and dt < 60
    assert report("C1 EM monotonicity", ok,
                  f"1000 fits, {n_bad} non-monotone traces, worst step {worst:.2e}, "
                  f"mean {iters / 1000:.1f} iterations, {dt:.1f}s (limit 60s)")


# 2 ---------------------------------------------------------------------------

def test_c02_responsibilities():
    rng = np.random.default_rng(2)
    worst_sum, out_of_range, rows = 0.0, 0, 0

    def check(g):
        nonlocal worst_sum, out_of_range, rows
        worst_sum = max(worst_sum, float(np.abs(g.sum(axis=1) - 1.0).max()))
        out_of_range += int(np.count_nonzero((g < 0) | (g > 1)))
        rows += g.shape[0]

    for i in range(300):
        X = _random_dataset(rng)
        K = 1 + i % 3
        check(responsibilities(X, init_model(X, K, seed=i)))
        model, _ = em_fit(X, FitConfig(n_components=K, seed=i))
        check(responsibilities(X, model))
        # far tails, where every component density underflows
        check(responsibilities(rng.uniform(-1e4, 1e4, size=(200, 2)), model))
    ok = worst_sum <= 1e-12 and out_of_range == 0
    assert report("C2 responsibility rows", ok,
                  f"{rows} rows, max |row sum - 1| {worst_sum:.1e} (limit 1e-12), "
                  f"{out_of_range} entries outside [0, 1]")


# 3 ---------------------------------------------------------------------------

def test_c03_recovery():
    sigma = 1.0
    truth = GmmModel([0.35, 0.65], [[0.0, 0.0], [8.0 * sigma * 1.25, 3.0]],
                     [np.eye(2) * sigma**2, [[1.0, 0.3], [0.3, 0.7]]])
    X = sample_gmm(np.random.default_rng(3), truth, 10_000)
    t0 = time.perf_counter()
    model, rep = em_fit(X, FitConfig(n_components=2, seed=0))
    dt = time.perf_counter() - t0
    best = min(permutations(range(2)),
               key=lambda p: np.abs(model.means[list(p)] - truth.means).max())
    p = list(best)
    dmean = float(np.linalg.norm(model.means[p] - truth.means, axis=1).max())
    dw = float(np.abs(model.weights[p] - truth.weights).max())
    ok = dmean <= 0.05 and dw <= 0.02 and dt < 10
    assert report("C3 mixture recovery", ok,
                  f"mean error {dmean:.4f} (limit 0.05), weight error {dw:.4f} (limit 0.02), "
                  f"{rep.n_iter} iterations, {dt:.2f}s (limit 10s)")


# 4 ---------------------------------------------------------------------------

def _naive_density(x, comps):
    total = 0.0
    for w, mu, inv, det in comps:
        dx, dy = x[0] - mu[0], x[1] - mu[1]
        q = dx * (inv[0][0] * dx + inv[0][1] * dy) + dy * (inv[1][0] * dx + inv[1][1] * dy)
        if q < 1500:
            total += w * math.exp(-0.5 * q) / (2 * math.pi * math.sqrt(det))
    return total


def _naive_components(m):
    return [(float(w), mu.tolist(), np.linalg.inv(c).tolist(), float(np.linalg.det(c)))
            for w, mu, c in zip(m.weights, m.means, m.covs)]


def _mp_density(x, m):
    import mpmath
    total = mpmath.mpf(0)
    for w, mu, c in zip(m.weights, m.means, m.covs):
        a, b, d = (mpmath.mpf(float(v)) for v in (c[0, 0], c[0, 1], c[1, 1]))
        det = a * d - b * b
        dx = mpmath.mpf(float(x[0])) - mpmath.mpf(float(mu[0]))
        dy = mpmath.mpf(float(x[1])) - mpmath.mpf(float(mu[1]))
        q = (d * dx * dx - 2 * b * dx * dy + a * dy * dy) / det
        total += mpmath.mpf(float(w)) * mpmath.exp(-q / 2) / (2 * mpmath.pi * mpmath.sqrt(det))
    return total


def test_c04_classification_oracle():
    import mpmath
    rng = np.random.default_rng(4)
    pts = rng.uniform(-150, 200, size=(10_000, 2))
    mismatches, total, escalated = 0, 0, 0
    for _ in range(20):
        cm = ClassifierModel(random_gmm(rng, spread=80), random_gmm(rng, spread=80))
        cp, cb = _naive_components(cm.pads), _naive_components(cm.background)
        for x in pts:
            x = x.tolist()
            p, q = _naive_density(x, cp), _naive_density(x, cb)
            if min(p, q) > 1e-280 and abs(p - q) > 1e-9 * max(p, q):
                want = 1 if p > q else 0
            else:
                escalated += 1
                with mpmath.workdps(60):
                    want = 1 if _mp_density(x, cm.pads) > _mp_density(x, cm.background) else 0
            mismatches += classify_pixel(x, cm) != want
            total += 1
    # exact ties resolve to background
    g = GmmModel([1.0], [[10.0, 10.0]], [np.eye(2) * 5])
    tie_ok = all(classify_pixel(x, ClassifierModel(g, g)) == 0 for x in pts[:500])
    ok = mismatches == 0 and tie_ok
    assert report("C4 classification oracle", ok,
                  f"{total - mismatches}/{total} points agree "
                  f"({escalated} settled in 60-digit arithmetic), ties to background: {tie_ok}")


# 5 ---------------------------------------------------------------------------

def _uv_oracle_vec(rgb):
    """Independent vectorised colorimetry (power-law decode, matrix product)."""
    c = rgb.astype(np.float64) / 255.0
    lin = np.where(c > 0.04045, np.power((c + 0.055) / 1.055, 2.4), c / 12.92)
    M = np.array([[0.4124, 0.3576, 0.1805], [0.2126, 0.7152, 0.0722], [0.0193, 0.1192, 0.9505]])
    xyz = lin @ M.T
    wx, wy, wz = M.sum(axis=1)
    un = 4 * wx / (wx + 15 * wy + 3 * wz)
    vn = 9 * wy / (wx + 15 * wy + 3 * wz)
    yr = xyz[:, 1] / wy
    L = np.where(yr > 216 / 24389, 116 * np.power(yr, 1 / 3) - 16, yr * 24389 / 27)
    d = xyz[:, 0] + 15 * xyz[:, 1] + 3 * xyz[:, 2]
    with np.errstate(invalid="ignore", divide="ignore"):
        u = 13 * L * (4 * xyz[:, 0] / d - un)
        v = 13 * L * (9 * xyz[:, 1] / d - vn)
    u[d == 0] = 0.0
    v[d == 0] = 0.0
    return np.column_stack([u, v])


def _unpack(idx):
    return np.column_stack([(idx >> 16) & 255, (idx >> 8) & 255, idx & 255]).astype(np.uint8)


def test_c05_color_conversion():
    from oracles import uv_scalar
    t0 = time.perf_counter()
    worst, n = 0.0, 0
    # the stated stride, plus a stride-5 sweep that matches the stated ~3.4M count
    for stride in (17, 5):
        for start in range(0, 1 << 24, 1 << 22):
            rgb = _unpack(np.arange(start, min(start + (1 << 22), 1 << 24), dtype=np.int64)[
                (np.arange(start, min(start + (1 << 22), 1 << 24)) % stride) == 0])
            diff = np.abs(rgb_to_uv(rgb) - _uv_oracle_vec(rgb)).max()
            worst = max(worst, float(diff))
            n += rgb.shape[0]
    # the vectorised oracle itself against the scalar one
    sub = _unpack(np.arange(0, 1 << 24, 4099, dtype=np.int64))
    osc = max(float(np.abs(np.array(uv_scalar(*map(int, p))) - q).max())
              for p, q in zip(sub, _uv_oracle_vec(sub)))
    gray = max(max(abs(a) for a in srgb_to_uv((g, g, g))) for g in range(256))
    dt = time.perf_counter() - t0
    ok = worst <= 1e-3 and osc <= 1e-9 and gray <= 1e-6 and dt < 60
    assert report("C5 colour conversion", ok,
                  f"{n} triples, max deviation {worst:.1e} (limit 1e-3), "
                  f"oracle cross-check {osc:.1e}, max gray |u*,v*| {gray:.1e} (limit 1e-6), "
                  f"{dt:.1f}s (limit 60s)")


# 6 ---------------------------------------------------------------------------

def test_c06_untrimmed_mean():
    rng = np.random.default_rng(6)
    worst, cases = 0.0, 0
    for s in range(30):
        spec = SceneSpec(color_noise=0, edge_jitter=4.5, tilt_deg=float(rng.uniform(-10, 10)), seed=s)
        mask = synth_scene(spec)[1].mask
        left, right = extract_pad_regions(mask)
        ref = left if left.area >= right.area else right
        samples, _ = sample_edge_pairs(left, right, estimate_axis(ref))
        gaps = [smp.gap for smp in samples]
        got = mean_gap_pixels(samples, trim=False).gap_px
        worst = max(worst, abs(got - math.fsum(gaps) / len(gaps)))
        cases += 1
    for _ in range(500):
        gaps = rng.uniform(1, 1000, int(rng.integers(1, 200))).tolist()
        worst = max(worst, abs(mean_gap_pixels(gaps, trim=False).gap_px - math.fsum(gaps) / len(gaps)))
        cases += 1
    ok = worst <= 1e-12
    assert report("C6 untrimmed gap mean", ok,
                  f"{cases} sample sets, max deviation from arithmetic mean {worst:.1e} (limit 1e-12)")


# 7 ---------------------------------------------------------------------------

def test_c07_end_to_end_accuracy():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)

    def spec(seed):
        return SceneSpec(edge_jitter=4.5, tilt_deg=float(rng.uniform(-10, 10)), seed=seed)

    train = [synth_scene(spec(10_000 + i)) for i in range(8)]
    model = train_classifier([(img, t.mask) for img, t in train], TrainConfig(seed=0))
    errs, failed = [], 0
    for i in range(100):
        img, truth = synth_scene(spec(20_000 + i))
        try:
            res = measure_diameter(classify_image(img, model), truth.pad_height_mm)
        except Exception:
            failed += 1
            continue
        px_mm = truth.diameter_mm / truth.gap_px
        errs.append(abs(res.diameter_mm - truth.diameter_mm) / px_mm)
    dt = time.perf_counter() - t0
    mae, mx = float(np.mean(errs)), float(np.max(errs))
    ok = failed == 0 and mae <= 0.5 and mx <= 2.0 and dt < 300
    assert report("C7 end-to-end accuracy", ok,
                  f"100 scenes, {failed} failed, mean error {mae:.3f} px (limit 0.5), "
                  f"max {mx:.3f} px (limit 2), {dt:.0f}s (limit 300s)")


# 8 ---------------------------------------------------------------------------

def test_c08_luminosity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)

    def specs(brightness, seed0):
        return [SceneSpec(edge_jitter=4.5, tilt_deg=float(rng.uniform(-10, 10)),
                          brightness=brightness, seed=seed0 + i) for i in range(20)]

    bright, dim = specs(1.0, 30_000), specs(0.55, 40_000)
    rows = run_luminosity_experiment(bright, dim, train_count=4, seed=8)
    dt = time.perf_counter() - t0
    px_mm = bright[0].pad_height_mm / bright[0].pad_height_px
    means_px = [r.mean_abs_diff_mm / px_mm for r in rows]
    ok = all(np.isfinite(means_px)) and max(means_px) <= 1.0 and dt < 300
    detail = "; ".join(f"{r.test_condition} test set: {r.mean_abs_diff_mm:.4f} mm "
                       f"({m:.3f} px, std {r.std_abs_diff_mm:.4f} mm, n={r.n_images}, failed {r.n_failed})"
                       for r, m in zip(rows, means_px))
    assert report("C8 luminosity robustness", ok, f"{detail}; limit 1 px; {dt:.0f}s (limit 300s)")


# 9 ---------------------------------------------------------------------------

def test_c09_statistics():
    checks = []
    s = error_stats([10, 12], [11, 11])
    checks.append((s.mean_abs_error, s.std_abs_error, s.max_abs_error) == (1.0, 0.0, 1.0))
    s = error_stats([1.0, 2.0, 4.0], [0.0, 0.0, 0.0])
    checks.append(s.mean_abs_error == 7 / 3 and s.max_abs_error == 4.0
                  and s.std_abs_error == std_scalar([1.0, 2.0, 4.0]))
    checks.append(error_histogram([0.1, 0.3, 0.3], 0.2).bins() == [(0.0, 0.2, 1), (0.2, 0.4, 2)])
    checks.append(error_histogram([], 0.2).total == 0)
    rs = round_summary([([1, 1], [0, 0]), ([2, 2], [0, 0])])
    checks.append(rs.means == [2.0, 1.0])
    same = round_summary({"a": ([1, 2], [0, 0]), "b": ([1, 2], [0, 0])})
    checks.append([rid for rid, _ in same.entries] == ["a", "b"])
    checks.append(cross_condition_compare([1, 2, 3], [1, 2, 3]) == (0.0, 0.0))

    rng = np.random.default_rng(9)
    m, r = rng.normal(30, 3, 840), rng.normal(30, 3, 840)
    s = error_stats(m, r)
    e = [abs(a - b) for a, b in zip(m.tolist(), r.tolist())]
    checks.append(abs(s.mean_abs_error - mean_scalar(e)) <= 1e-12 * mean_scalar(e)
                  and abs(s.std_abs_error - std_scalar(e)) <= 1e-12 * std_scalar(e)
                  and s.max_abs_error == max(e))
    rounds = [(rng.normal(30, 1, 30), rng.normal(30, 1, 30)) for _ in range(28)]
    rs = round_summary(rounds)
    checks.append(all(a >= b for a, b in zip(rs.means, rs.means[1:])))
    checks.append(all(st.mean_abs_error == error_stats(*rounds[i]).mean_abs_error for i, st in rs.entries))

    conserved = True
    for w in (0.05, 0.2, 0.3, 1.0):
        errs = rng.uniform(0, 2, 10_000)
        h = error_histogram(errs, w)
        want = histogram_scalar(errs.tolist(), w)
        got = {round(lo / w): c for lo, _, c in h.bins() if c}
        conserved &= h.total == 10_000 and got == want
    checks.append(conserved)
    ok = all(checks)
    assert report("C9 statistics", ok,
                  f"{sum(checks)}/{len(checks)} fixture groups exact, histogram totals conserved: {conserved}")


# 10 --------------------------------------------------------------------------

def _pipeline(root, seed):
    from trunkgauge.cli import main
    common = ["--seed", str(seed), "--width", "320", "--height", "240", "--gap-px", "150",
              "--pad-h-px", "100", "--pad-w-px", "20", "--pad-height-mm", "10",
              "--edge-jitter", "4.5", "--tilt-spread", "10"]
    codes = [
        main(["synth", "--count", "4", "--out", str(root / "train"), *common]),
        main(["synth", "--count", "6", "--out", str(root / "test"), *common[:1],
              str(seed + 1), *common[2:]]),
        main(["train", "--images", str(root / "train/images"), "--masks", str(root / "train/masks"),
              "--out", str(root / "model.json"), "--seed", str(seed)]),
        main(["segment", "--model", str(root / "model.json"),
              "--image", str(root / "test/images/scene0000.png"), "--out", str(root / "mask.png")]),
        main(["measure", "--model", str(root / "model.json"), "--input", str(root / "test/images"),
              "--pad-height-mm", "10", "--out", str(root / "results.csv")]),
        main(["evaluate", "--pred", str(root / "results.csv"), "--ref", str(root / "test/manifest.csv"),
              "--out", str(root / "report.txt")]),
    ]
    return codes


def test_c10_determinism(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    codes = _pipeline(a, 5) + _pipeline(b, 5)
    files = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    differ = [str(f) for f in files if (a / f).read_bytes() != (b / f).read_bytes()]
    with open(a / "results.csv") as fh:
        n_ok = sum(r["status"] == "ok" for r in csv.DictReader(fh))
    ok = all(c == 0 for c in codes) and not differ and len(files) >= 24 and n_ok == 6
    assert report("C10 determinism", ok,
                  f"{len(files)} files compared (model, masks, images, CSVs, report), "
                  f"{len(differ)} differ, exit codes {sorted(set(codes))}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
