"""Dataset manifests (CSV with a header row, or a JSON list of row objects).

Required columns: ``image_id``, ``split`` (train|val), ``label``
(negative|neutral|positive) and ``image_path``. ``caption_path`` is optional
and every ``<modality>_features`` column names that modality's AFFZ file.
Relative paths resolve against the manifest's directory. Empty optional
cells mean "no caption" / "no detected entities".
"""

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..classify import LABEL_NAMES

REQUIRED = ("image_id", "split", "label", "image_path")
SPLITS = ("train", "val")
LABELS = {name: i for i, name in enumerate(LABEL_NAMES)}


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class ManifestRow:
    image_id: str
    split: str
    label: int
    image_path: Path
    caption_path: Path = None
    entity_feature_paths: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DatasetManifest:
    rows: tuple
    source: Path = None

    def __len__(self):
        return len(self.rows)

    def split(self, name):
        return [r for r in self.rows if r.split == name]

    @property
    def ids(self):
        return [r.image_id for r in self.rows]

    @property
    def modalities(self):
        names = set()
        for r in self.rows:
            names.update(r.entity_feature_paths)
        return sorted(names)

    def restrict(self, ids):
        keep = set(ids)
        return DatasetManifest(tuple(r for r in self.rows if r.image_id in keep), self.source)


def _records(path):
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
        if not isinstance(data, list):
            raise ManifestError(f"{path}: JSON manifest must be a list of row objects")
        return [(i + 1, {k: "" if v is None else str(v) for k, v in row.items()}) for i, row in enumerate(data)]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ManifestError(f"{path}:1: missing header row")
        missing = [c for c in REQUIRED if c not in reader.fieldnames]
        if missing:
            raise ManifestError(f"{path}:1: header lacks required column(s) {', '.join(missing)}")
        out = []
        for row in reader:
            if None in row:
                raise ManifestError(f"{path}:{reader.line_num}: more cells than header columns")
            if any(v is None for v in row.values()):
                raise ManifestError(f"{path}:{reader.line_num}: fewer cells than header columns")
            out.append((reader.line_num, row))
        return out


def load_manifest(path, check_files=True):
    """Parse and validate a manifest; referenced files are checked eagerly."""
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"{path}: manifest not found")
    base = path.parent
    rows, seen = [], {}
    for line, rec in _records(path):
        where = f"{path}:{line}"
        for col in REQUIRED:
            if not rec.get(col, "").strip():
                raise ManifestError(f"{where}: empty {col}")
        image_id = rec["image_id"].strip()
        if image_id in seen:
            raise ManifestError(f"{where}: duplicate image_id {image_id!r} (first on line {seen[image_id]})")
        seen[image_id] = line
        split = rec["split"].strip().lower()
        if split not in SPLITS:
            raise ManifestError(f"{where}: unknown split {rec['split']!r}")
        label = rec["label"].strip().lower()
        if label not in LABELS:
            raise ManifestError(f"{where}: unknown label {rec['label']!r} (expected one of {', '.join(LABELS)})")

        def resolve(cell, _where=where):
            cell = (cell or "").strip()
            if not cell:
                return None
            p = Path(cell)
            p = p if p.is_absolute() else base / p
            if check_files and not p.exists():
                raise ManifestError(f"{_where}: missing file {p}")
            return p

        entity = {}
        for col, cell in rec.items():
            if col.endswith("_features"):
                # None: the modality exists but nothing was detected in this image
                entity[col[: -len("_features")]] = resolve(cell)
        rows.append(ManifestRow(image_id, split, LABELS[label], resolve(rec["image_path"]),
                                resolve(rec.get("caption_path")), entity))
    if not rows:
        raise ManifestError(f"{path}: manifest has no rows")
    return DatasetManifest(tuple(rows), path)


def write_manifest(path, rows, modalities=("face", "pose")):
    """Write rows (dicts with manifest column names) as CSV."""
    cols = list(REQUIRED) + ["caption_path"] + [f"{m}_features" for m in modalities]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({c: row.get(c, "") for c in cols})
