"""Scan persisted run artifacts for the image ids each fitted model was trained on."""

import json
from pathlib import Path

_ID_KEYS = ("provenance", "fold_train_ids")


def _collect(node, found):
    if isinstance(node, dict):
        for key, value in node.items():
            if key in _ID_KEYS and isinstance(value, list):
                for v in value:
                    if isinstance(v, list):
                        found.update(map(str, v))
                    else:
                        found.add(str(v))
            else:
                _collect(value, found)
    elif isinstance(node, list):
        for v in node:
            _collect(v, found)


def provenance_ids(run_dir):
    """``{artifact path: set of image ids}`` for every fitted-model JSON under ``models/``."""
    out = {}
    for path in sorted(Path(run_dir, "models").rglob("*.json")):
        found = set()
        _collect(json.loads(path.read_text(encoding="utf-8")), found)
        out[path] = found
    return out


def find_leaks(run_dir, forbidden_ids):
    """``(artifact, image id)`` pairs where a forbidden id shows up in a fitted model's provenance."""
    forbidden = set(forbidden_ids)
    return [(path, i) for path, ids in provenance_ids(run_dir).items() for i in sorted(ids & forbidden)]
