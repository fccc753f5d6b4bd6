"""Synthetic datasets that exercise the whole system without external data.

``make_fixture`` writes a small image dataset in the pipeline's input
formats: procedural PGM scenes whose texture depends on the class, Gaussian
per-class "face" and "pose" embeddings in AFFZ files (some images have no
detections), and template captions.

``complementary_experts`` builds a plain feature matrix with three disjoint
feature blocks; block ``b`` only separates class ``b`` from the rest, so no
single block identifies every class but the blocks together do.
"""

from pathlib import Path

import numpy as np

from ..centrist import write_pgm
from ..classify import LABEL_NAMES, LabeledDataset
from .features import write_entity_features
from .manifest import write_manifest

SUBJECTS = ("a group of people", "two men", "a woman and a child", "people", "a crowd of people")
VERBS = (
    ("protesting", "fighting", "crying", "shouting"),
    ("sitting", "standing", "waiting", "walking"),
    ("smiling", "celebrating", "dancing", "laughing"),
)
PLACES = ("in a street", "at a table", "in a park", "in front of a building", "on a stage")


def _scene(rng, label, height, width):
    yy, xx = np.mgrid[0:height, 0:width]
    if label == 0:
        base = 70 + 40 * ((yy // 5) % 2)
    elif label == 1:
        base = 90 + 80 * xx / max(1, width - 1)
    else:
        base = 130 + 50 * (((yy // 8) + (xx // 8)) % 2)
    img = base + rng.normal(0, 18, size=(height, width))
    return np.clip(np.round(img), 0, 255).astype(np.uint8)


def _caption(rng, label):
    own = rng.random() < 0.7
    verbs = VERBS[label] if own else VERBS[rng.integers(3)]
    return f"{SUBJECTS[rng.integers(len(SUBJECTS))]} {verbs[rng.integers(len(verbs))]} {PLACES[rng.integers(len(PLACES))]}\n"


def make_fixture(out_dir, n_images=60, seed=0, val_fraction=1 / 3, face_dim=16, pose_dim=12,
                 image_size=(48, 64), max_faces=5):
    """Write the dataset under ``out_dir`` and return the manifest path.

    Labels cycle negative/neutral/positive; the last ``val_fraction`` of each
    class goes to the validation split.
    """
    out = Path(out_dir)
    for sub in ("images", "faces", "poses", "captions"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    face_means = rng.normal(0, 1.6, size=(3, face_dim))
    pose_means = rng.normal(0, 0.4, size=(3, pose_dim))
    labels = np.arange(n_images) % 3
    n_val_per_class = {c: int(round(np.sum(labels == c) * val_fraction)) for c in range(3)}
    seen = {c: 0 for c in range(3)}
    per_class = {c: int(np.sum(labels == c)) for c in range(3)}
    rows = []
    for i, label in enumerate(labels):
        label = int(label)
        image_id = f"img_{i:03d}"
        split = "val" if seen[label] >= per_class[label] - n_val_per_class[label] else "train"
        seen[label] += 1
        write_pgm(out / "images" / f"{image_id}.pgm", _scene(rng, label, *image_size))
        n_faces = int(rng.integers(0, max_faces + 1))
        owners = np.where(rng.random(n_faces) < 0.75, label, rng.integers(0, 3, size=n_faces))
        faces = face_means[owners] + rng.normal(0, 1.0, size=(n_faces, face_dim))
        write_entity_features(out / "faces" / f"{image_id}.affz", faces, dim=face_dim)
        poses = pose_means[np.full(n_faces, label)] + rng.normal(0, 1.0, size=(n_faces, pose_dim))
        write_entity_features(out / "poses" / f"{image_id}.affz", poses, dim=pose_dim)
        (out / "captions" / f"{image_id}.txt").write_text(_caption(rng, label), encoding="utf-8")
        rows.append({
            "image_id": image_id, "split": split, "label": LABEL_NAMES[label],
            "image_path": f"images/{image_id}.pgm", "caption_path": f"captions/{image_id}.txt",
            "face_features": f"faces/{image_id}.affz", "pose_features": f"poses/{image_id}.affz",
        })
    manifest = out / "manifest.csv"
    write_manifest(manifest, rows)
    return manifest


def fixture_config(output_dir, **overrides):
    """Desk-scale run configuration matched to :func:`make_fixture` data."""
    from .config import RunConfig

    params = dict(
        vocab_size=8, gmm_components=4, caption_vocab_size=40, kmeans_max_iter=50, gmm_max_iter=50,
        classifiers={
            "rf": {"trees": 40, "max_depth": 8, "min_leaf": 1, "mtry": "sqrt"},
            "et": {"trees": 40, "max_depth": 8, "min_leaf": 1, "mtry": "sqrt"},
            "gbt": {"rounds": 20, "learning_rate": 0.1, "max_depth": 2},
            "svm": {"C": 1.0, "epochs": 20},
        },
        combiner={"l2": 1e-3, "epochs": 300, "lr": 0.5},
        folds=3, output_dir=str(output_dir),
    )
    params.update(overrides)
    return RunConfig(**params)


def complementary_experts(n_per_class=80, block_dim=4, separation=4.0, noise=1.0, seed=0, val_fraction=0.5):
    """``(train, val, blocks)``; ``blocks[b]`` is the ``(start, stop)`` column range of block ``b``."""
    rng = np.random.default_rng(seed)
    n = 3 * n_per_class
    labels = np.repeat(np.arange(3), n_per_class)
    X = rng.normal(0, noise, size=(n, 3 * block_dim))
    for b in range(3):
        X[labels == b, b * block_dim:(b + 1) * block_dim] += separation / np.sqrt(block_dim)
    order = rng.permutation(n)
    X, labels = X[order], labels[order]
    ids = tuple(f"s{i:04d}" for i in range(n))
    is_val = np.zeros(n, dtype=bool)
    for c in range(3):
        rows = np.flatnonzero(labels == c)
        is_val[rows[: int(round(len(rows) * val_fraction))]] = True
    def part(mask):
        rows = np.flatnonzero(mask)
        return LabeledDataset(X[rows], labels[rows], tuple(ids[r] for r in rows))
    blocks = [(b * block_dim, (b + 1) * block_dim) for b in range(3)]
    return part(~is_val), part(is_val), blocks
