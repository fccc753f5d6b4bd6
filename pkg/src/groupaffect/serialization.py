"""Versioned binary envelope for fitted models.

Layout (all integers little-endian)::

    magic        4 bytes  b"GAMB"
    version      u16
    kind tag     u8       see KIND_TAGS
    k            u32      clusters / components / classes
    dim          u32      input dimensionality
    n_arrays     u32
    per array:   u16 name length, name (utf-8), u8 dtype tag (0 = f64, 1 = i64),
                 u8 ndim, ndim x u64 shape, row-major little-endian payload
    meta length  u32, then canonical JSON (sorted keys, utf-8)
    crc32        u32 over every preceding byte

Arrays are written in the order the model declares them; for a GMM that is
weights, means, variances. Each binary file gets a ``.json`` mirror with the
same content for inspection.
"""

import json
import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"GAMB"
VERSION = 1
KIND_TAGS = {"kmeans": 1, "gmm": 2, "rf": 3, "et": 4, "gbt": 5, "svm": 6, "logreg": 7, "stack": 8}
_TAG_KINDS = {v: k for k, v in KIND_TAGS.items()}
_DTYPES = {0: np.dtype("<f8"), 1: np.dtype("<i8")}


class ModelFormatError(ValueError):
    pass


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def dumps_model(kind, k, dim, arrays, meta):
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HBIII", VERSION, KIND_TAGS[kind], k, dim, len(arrays))
    for name, arr in arrays.items():
        arr = np.asarray(arr)
        if np.issubdtype(arr.dtype, np.integer):
            tag, arr = 1, arr.astype("<i8")
        else:
            tag, arr = 0, arr.astype("<f8")
        raw = name.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
        out += struct.pack("<BB", tag, arr.ndim)
        out += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        out += np.ascontiguousarray(arr).tobytes()
    blob = canonical_json(meta).encode("utf-8")
    out += struct.pack("<I", len(blob)) + blob
    out += struct.pack("<I", zlib.crc32(out))
    return bytes(out)


def loads_model(data):
    """Inverse of :func:`dumps_model`: ``(kind, k, dim, arrays, meta)``."""
    if len(data) < 23 or data[:4] != MAGIC:
        raise ModelFormatError("not a model file (bad magic)")
    (crc,) = struct.unpack_from("<I", data, len(data) - 4)
    if zlib.crc32(data[:-4]) != crc:
        raise ModelFormatError("checksum mismatch")
    version, tag, k, dim, n_arrays = struct.unpack_from("<HBIII", data, 4)
    if version != VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    if tag not in _TAG_KINDS:
        raise ModelFormatError(f"unknown model kind tag {tag}")
    pos = 19
    arrays = {}
    try:
        for _ in range(n_arrays):
            (nlen,) = struct.unpack_from("<H", data, pos)
            pos += 2
            name = data[pos:pos + nlen].decode("utf-8")
            pos += nlen
            dtag, ndim = struct.unpack_from("<BB", data, pos)
            pos += 2
            shape = struct.unpack_from(f"<{ndim}Q", data, pos)
            pos += 8 * ndim
            dtype = _DTYPES[dtag]
            nbytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
            if pos + nbytes > len(data) - 4:
                raise ModelFormatError(f"array {name!r} truncated at byte {pos}")
            arrays[name] = np.frombuffer(data, dtype=dtype, count=nbytes // dtype.itemsize,
                                         offset=pos).reshape(shape).astype(dtype.newbyteorder("="))
            pos += nbytes
        (mlen,) = struct.unpack_from("<I", data, pos)
        meta = json.loads(data[pos + 4:pos + 4 + mlen].decode("utf-8"))
    except (struct.error, KeyError, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"corrupt model payload: {exc}") from None
    return _TAG_KINDS[tag], k, dim, arrays, meta


def mirror_path(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def save_model(path, kind, k, dim, arrays, meta):
    """Write the binary model and its JSON mirror; returns the binary path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(dumps_model(kind, k, dim, arrays, meta))
    tmp.replace(path)
    mirror = {
        "format_version": VERSION,
        "kind": kind,
        "k": k,
        "dim": dim,
        "meta": meta,
        "arrays": {name: np.asarray(a).tolist() for name, a in arrays.items()},
    }
    mirror_path(path).write_text(json.dumps(mirror, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return path


def load_model_file(path):
    return loads_model(Path(path).read_bytes())
