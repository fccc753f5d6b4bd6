"""AFFZ feature files and persisted feature matrices.

AFFZ layout (little-endian)::

    magic     4 bytes  b"AFFZ"
    version   u16      1
    width     u8       bytes per element: 4 (float32) or 8 (float64)
    count     u32      number of vectors (0 allowed)
    dim       u32      vector length
    payload   count * dim elements, row-major
    crc32     u32      over every preceding byte

Per-entity inputs (one vector per detected face or pose) use float32.
Feature matrices written by the pipeline use float64 so a reload is exact,
with a JSON sidecar holding image ids, metadata and the run's config hash.
"""

import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

MAGIC = b"AFFZ"
VERSION = 1
HEADER = struct.Struct("<4sHBII")
_WIDTH_DTYPES = {4: np.dtype("<f4"), 8: np.dtype("<f8")}
MATRIX_SCHEMA = 1


class FeatureFileError(ValueError):
    pass


class ConfigHashMismatch(FeatureFileError):
    pass


def dumps_affz(vectors, dim=None, width=4):
    if width not in _WIDTH_DTYPES:
        raise FeatureFileError(f"unsupported element width {width}")
    arr = np.asarray(vectors, dtype=np.float64)
    if arr.size == 0:
        if dim is None:
            raise FeatureFileError("an empty feature file still needs its dimension")
        arr = arr.reshape(0, dim)
    if arr.ndim != 2:
        raise FeatureFileError(f"expected (count, dim) vectors, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise FeatureFileError(f"vectors have dimension {arr.shape[1]}, declared {dim}")
    body = HEADER.pack(MAGIC, VERSION, width, arr.shape[0], arr.shape[1])
    body += np.ascontiguousarray(arr.astype(_WIDTH_DTYPES[width])).tobytes()
    return body + struct.pack("<I", zlib.crc32(body))


def write_entity_features(path, vectors, dim=None, width=4):
    Path(path).write_bytes(dumps_affz(vectors, dim=dim, width=width))


def loads_affz(data, expected_dim=None, source="<bytes>"):
    if len(data) < HEADER.size:
        raise FeatureFileError(f"{source}: truncated header ({len(data)} of {HEADER.size} bytes)")
    magic, version, width, count, dim = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FeatureFileError(f"{source}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FeatureFileError(f"{source}: unsupported version {version}, expected {VERSION}")
    if width not in _WIDTH_DTYPES:
        raise FeatureFileError(f"{source}: unsupported element width {width}")
    if expected_dim is not None and dim != expected_dim:
        raise FeatureFileError(f"{source}: dimension {dim} disagrees with expected {expected_dim}")
    payload_end = HEADER.size + count * dim * width
    if len(data) < payload_end + 4:
        have = max(0, len(data) - HEADER.size)
        raise FeatureFileError(
            f"{source}: truncated payload at byte offset {len(data)} "
            f"(have {have} of {count * dim * width} payload bytes plus 4-byte checksum)")
    if len(data) > payload_end + 4:
        raise FeatureFileError(
            f"{source}: {len(data) - payload_end - 4} trailing bytes; header declares {count} x {dim}")
    (crc,) = struct.unpack_from("<I", data, payload_end)
    if zlib.crc32(data[:payload_end]) != crc:
        raise FeatureFileError(f"{source}: checksum mismatch")
    arr = np.frombuffer(data, dtype=_WIDTH_DTYPES[width], count=count * dim, offset=HEADER.size)
    return arr.reshape(count, dim).astype(np.float64)


def load_entity_features(path, expected_dim=None):
    """Vectors of one image as a ``(count, dim)`` float64 array; ``count`` may be 0."""
    return loads_affz(Path(path).read_bytes(), expected_dim=expected_dim, source=str(path))


@dataclass(eq=False)
class FeatureMatrix:
    """One row per image, every row the same length (``N x K``)."""

    ids: tuple
    rows: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise FeatureFileError(f"feature matrix must be 2-D, got shape {rows.shape}")
        if rows.shape[0] != len(self.ids):
            raise FeatureFileError(f"{rows.shape[0]} rows but {len(self.ids)} ids")
        self.rows = rows
        self.ids = tuple(self.ids)

    @property
    def dim(self):
        return self.rows.shape[1]

    def __len__(self):
        return self.rows.shape[0]

    def select(self, ids):
        index = {i: r for r, i in enumerate(self.ids)}
        return self.rows[[index[i] for i in ids]]

    def save(self, stem):
        """Write ``<stem>.affz`` and ``<stem>.json``."""
        stem = Path(stem)
        stem.parent.mkdir(parents=True, exist_ok=True)
        blob = dumps_affz(self.rows, dim=self.dim, width=8)
        sidecar = {
            "schema": MATRIX_SCHEMA,
            "ids": list(self.ids),
            "dim": self.dim,
            "metadata": self.metadata,
            "payload_crc32": zlib.crc32(blob),
        }
        _atomic_write(stem.with_suffix(".affz"), blob)
        _atomic_write(stem.with_suffix(".json"),
                      (json.dumps(sidecar, sort_keys=True, indent=1) + "\n").encode("utf-8"))
        return stem

    @classmethod
    def load(cls, stem, config_hash=None):
        stem = Path(stem)
        sidecar = json.loads(stem.with_suffix(".json").read_text(encoding="utf-8"))
        if sidecar.get("schema") != MATRIX_SCHEMA:
            raise FeatureFileError(f"{stem}: unsupported feature matrix schema {sidecar.get('schema')}")
        meta = sidecar["metadata"]
        if config_hash is not None and meta.get("config_hash") != config_hash:
            raise ConfigHashMismatch(
                f"{stem}: written under config {meta.get('config_hash')}, current config is {config_hash}")
        blob = stem.with_suffix(".affz").read_bytes()
        if zlib.crc32(blob) != sidecar["payload_crc32"]:
            raise FeatureFileError(f"{stem}: payload does not match its sidecar")
        rows = loads_affz(blob, expected_dim=sidecar["dim"], source=str(stem.with_suffix(".affz")))
        return cls(tuple(sidecar["ids"]), rows, meta)


def _atomic_write(path, data):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    tmp.replace(path)
