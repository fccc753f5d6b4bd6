"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py`` (the summary lines appear at the end
of the session) or ``python3 tests/test_acceptance.py`` to print them
directly.
"""

import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from groupaffect import centrist as C
from groupaffect.classify import (BaseSpec, LabeledDataset, evaluate, logistic_loss_grad, train_classifier,
                                  train_stack)
from groupaffect.codebook import Codebook, GmmModel, fit_gmm
from groupaffect.encoder import encode_gmm, encode_tf, encode_vlad, encode_wa
from groupaffect.pipeline import Run, find_leaks, fixture_config, run_pipeline

DATA = Path(__file__).parent / "data" / "complementary_experts.npz"
RESULTS = []
OFFSETS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]


def record(number, title, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


def census_oracle(img):
    h, w = img.shape
    out = np.zeros((h - 2, w - 2), dtype=np.int64)
    for r in range(1, h - 1):
        for c in range(1, w - 1):
            code = 0
            for dr, dc in OFFSETS:
                code = (code << 1) | int(img[r, c] >= img[r + dr, c + dc])
            out[r - 1, c - 1] = code
    return out


def random_image(rng, k, d):
    """A codebook and a word set of random size for the encoder criteria."""
    book = Codebook(rng.normal(size=(k, d)), 0.0)
    return book, rng.normal(size=(int(rng.integers(1, 40)), d))


def test_c01_descriptor_dimension():
    rng = np.random.default_rng(1)
    sizes = [(6, 6), (7, 9), (31, 17), (64, 64), (101, 203)]
    lengths = {len(C.centrist(rng.integers(0, 256, size=s).astype(np.uint8))) for s in sizes}
    img = rng.integers(0, 256, size=(480, 640)).astype(np.uint8)
    start = time.perf_counter()
    d = C.centrist(img)
    elapsed = time.perf_counter() - start
    lengths.add(len(d))
    record(1, "CENTRIST dimension", lengths == {7905} and elapsed < 1.0,
           f"lengths {sorted(lengths)}, 640x480 in {elapsed * 1000:.1f} ms")


def test_c02_census_oracle():
    rng = np.random.default_rng(2)
    start = time.perf_counter()
    mismatches = 0
    for _ in range(100):
        img = rng.integers(0, 256, size=(64, 64)).astype(np.uint8)
        mismatches += int(np.sum(C.census_transform(img) != census_oracle(img)))
    elapsed = time.perf_counter() - start
    record(2, "census oracle equivalence", mismatches == 0 and elapsed < 5.0,
           f"{mismatches} mismatched pixels over 100 images, {elapsed:.2f} s including the oracle")


def test_c03_tf_exactness():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(1000):
        book, words = random_image(rng, int(rng.integers(1, 20)), int(rng.integers(1, 6)))
        codes = [min(range(book.k), key=lambda j: (float(np.sum((words[i] - book.centroids[j]) ** 2)), j))
                 for i in range(len(words))]
        exact = [Fraction(codes.count(j), len(codes)) for j in range(book.k)]
        got = encode_tf(book, words).values
        worst = max(worst, max(abs(Fraction(float(g)) - e) for g, e in zip(got, exact)))
    record(3, "term-frequency exactness", worst <= 1e-12, f"max abs error {float(worst):.2e} over 1000 images")


def test_c04_vlad():
    rng = np.random.default_rng(4)
    worst_rel, worst_norm, zero_ok = 0.0, 0.0, True
    for _ in range(500):
        book, words = random_image(rng, int(rng.integers(1, 10)), int(rng.integers(1, 6)))
        oracle = np.zeros_like(book.centroids)
        for w in words:
            j = int(np.argmin(np.sum((book.centroids - w) ** 2, axis=1)))
            oracle[j] += w - book.centroids[j]
        oracle = oracle.ravel()
        raw = encode_vlad(book, words, normalize=False).values
        scale = max(np.max(np.abs(oracle)), 1e-300)
        worst_rel = max(worst_rel, float(np.max(np.abs(raw - oracle)) / scale))
        worst_norm = max(worst_norm, abs(np.linalg.norm(encode_vlad(book, words).values) - 1.0))
    book = Codebook(np.array([[0.0, 0.0], [3.0, 1.0]]), 0.0)
    zero_ok &= bool(np.all(encode_vlad(book, [[3.0, 1.0]]).values == 0.0))
    zero_ok &= bool(np.all(encode_vlad(book, [[2.0, 1.0], [4.0, 1.0], [0.0, 0.0]]).values == 0.0))
    record(4, "VLAD exactness and normalization", worst_rel <= 1e-9 and worst_norm <= 1e-12 and zero_ok,
           f"max relative error {worst_rel:.2e}, max |norm-1| {worst_norm:.2e}, zero-residual case zeros={zero_ok}")


def test_c05_wa_identity():
    rng = np.random.default_rng(5)
    worst = 0.0
    for _ in range(1000):
        book, words = random_image(rng, int(rng.integers(1, 20)), int(rng.integers(1, 8)))
        expected = encode_tf(book, words).values @ book.centroids
        worst = max(worst, float(np.max(np.abs(encode_wa(book, words).values - expected))))
    record(5, "weighted-average identity", worst <= 1e-9, f"max abs difference {worst:.2e} over 1000 images")


def test_c06_em_monotonicity():
    worst, iters = 0.0, 0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        k, d = int(rng.integers(1, 7)), int(rng.integers(1, 5))
        centers = rng.normal(0, 3, size=(k, d))
        X = np.vstack([c + rng.uniform(0.3, 1.5) * rng.normal(size=(int(rng.integers(5, 40)), d)) for c in centers])
        h = np.array(fit_gmm(X, k, seed=seed, max_iter=100, tol=1e-10).log_likelihood_history)
        iters += len(h) - 1
        if len(h) > 1:
            worst = max(worst, float(np.max(h[:-1] - h[1:])))
    record(6, "EM monotonicity", worst <= 1e-8, f"largest per-iteration decrease {worst:.2e} over 50 fits, "
                                                f"{iters} EM iterations")


def test_c07_responsibility_normalization():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(500):
        k, d = int(rng.integers(1, 10)), int(rng.integers(1, 6))
        model = GmmModel(rng.dirichlet(np.ones(k)), rng.normal(0, 3, size=(k, d)), rng.uniform(0.1, 3, size=(k, d)))
        words = rng.normal(0, 4, size=(int(rng.integers(1, 30)), d))
        worst = max(worst, abs(encode_gmm(model, words).values.sum() - 1.0))
    sym = GmmModel(np.array([0.5, 0.5]), np.array([[-1.0], [1.0]]), np.array([[1.0], [1.0]]))
    sym_err = float(np.max(np.abs(encode_gmm(sym, [[0.0]]).values - 0.5)))
    record(7, "responsibility normalization", worst <= 1e-9 and sym_err <= 1e-9,
           f"max |sum-1| {worst:.2e} over 500 images, symmetric case error {sym_err:.2e}")


def test_c08_gradient_check():
    worst, h = 0.0, 1e-5
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n, f, k = int(rng.integers(3, 12)), int(rng.integers(1, 6)), int(rng.integers(2, 5))
        X, y = rng.normal(size=(n, f)), rng.integers(0, k, size=n)
        W, b, l2 = rng.normal(size=(f, k)), rng.normal(size=k), float(rng.uniform(0, 0.5))
        _, gW, gb = logistic_loss_grad(W, b, X, y, l2)
        for idx in np.ndindex(*W.shape):
            Wp, Wm = W.copy(), W.copy()
            Wp[idx] += h
            Wm[idx] -= h
            fd = (logistic_loss_grad(Wp, b, X, y, l2)[0] - logistic_loss_grad(Wm, b, X, y, l2)[0]) / (2 * h)
            worst = max(worst, abs(fd - gW[idx]))
        for i in range(k):
            bp, bm = b.copy(), b.copy()
            bp[i] += h
            bm[i] -= h
            fd = (logistic_loss_grad(W, bp, X, y, l2)[0] - logistic_loss_grad(W, bm, X, y, l2)[0]) / (2 * h)
            worst = max(worst, abs(fd - gb[i]))
    record(8, "logistic gradient check", worst <= 1e-6, f"max abs difference {worst:.2e} on 20 instances")


def load_experts():
    d = np.load(DATA)
    train = LabeledDataset(d["train_X"], d["train_y"], tuple(d["train_ids"]))
    val = LabeledDataset(d["val_X"], d["val_y"], tuple(d["val_ids"]))
    return train, val, [tuple(int(v) for v in b) for b in d["blocks"]]


def test_c09_stacking_gain():
    start = time.perf_counter()
    train, val, blocks = load_experts()
    config = {"trees": 100, "max_depth": 16, "mtry": "sqrt", "seed": 0}
    singles = []
    for a, b in blocks:
        model = train_classifier("rf", train.columns(slice(a, b)), config)
        singles.append(evaluate(model, val.columns(slice(a, b)))["accuracy"])
    concat = evaluate(train_classifier("rf", train, config), val)["accuracy"]
    specs = [BaseSpec("rf", config, {"start": a, "stop": b}, f"block{i}") for i, (a, b) in enumerate(blocks)]
    stacked = evaluate(train_stack(train, specs, folds=5, seed=0), val)["accuracy"]
    elapsed = time.perf_counter() - start
    best = max(singles)
    ok = stacked - best >= 0.03 and all(stacked > s for s in singles) and concat > best and stacked > concat \
        and elapsed < 120
    record(9, "stacking gain", ok,
           f"per-block {[round(s, 4) for s in singles]}, concatenated {concat:.4f}, stacked {stacked:.4f} "
           f"(+{100 * (stacked - best):.1f} pp over best base), {elapsed:.1f} s")


def test_c10_fixed_length_vectors(fixture_run, fixture_dataset, tmp_path):
    config, report = fixture_run
    run = Run(config, fixture_dataset)
    full = run.fused()
    keep = [r.image_id for r in fixture_dataset.rows if int(r.image_id[-3:]) % 4 != 1]
    sub = Run(fixture_config(tmp_path), fixture_dataset.restrict(keep)).fused()
    ok = (full.rows.shape == (60, report["feature_dims"]["fused"]) and sub.rows.shape == (len(keep), full.dim)
          and full.dim == sum(p["length"] for p in full.metadata["parts"]))
    record(10, "N x K contract", ok, f"60 images -> {full.rows.shape}, {len(keep)} images -> {sub.rows.shape}")


def _tree(root):
    root = Path(root)
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_c11_determinism(fixture_run, fixture_dataset, tmp_path):
    config, report = fixture_run
    start = time.perf_counter()
    again = run_pipeline(fixture_config(tmp_path), fixture_dataset)
    a, b = _tree(config.output_dir), _tree(tmp_path)
    differing = sorted(k for k in set(a) | set(b) if a.get(k) != b.get(k))
    ok = again == report and not differing and (tmp_path / "report.json").read_bytes() == \
        (Path(config.output_dir) / "report.json").read_bytes()
    record(11, "determinism", ok, f"{len(a)} artifacts compared, {len(differing)} differ, "
                                  f"second run {time.perf_counter() - start:.1f} s")


def test_c12_leakage_guard(fixture_run, fixture_dataset):
    config, _ = fixture_run
    val_ids = [r.image_id for r in fixture_dataset.split("val")]
    leaks = find_leaks(config.output_dir, val_ids)
    scanned = sorted(p.name for p in (Path(config.output_dir) / "models").rglob("*.json"))
    kinds = {"kmeans": any("kmeans" in n for n in scanned), "gmm": any("gmm" in n for n in scanned),
             "classifier": any("__" in n for n in scanned), "combiner": "stack.bin.json" in scanned}
    record(12, "leakage guard", not leaks and all(kinds.values()),
           f"{len(scanned)} fitted-model artifacts scanned ({', '.join(k for k, v in kinds.items() if v)}), "
           f"{len(leaks)} validation ids found")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
