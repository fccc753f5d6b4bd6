"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
numpy twins in ``_pykernels`` are used. Set ``GROUPAFFECT_BACKEND=python`` to
force the fallback (``=cython`` makes a missing extension an error).
"""

import importlib
import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)

KERNEL_NAMES = (
    "census_transform",
    "block_histograms",
    "nearest_centroid",
    "gini_best_split",
    "gini_threshold_scores",
    "newton_best_split",
    "tree_apply",
)


def available_backends():
    names = ["python"]
    try:
        importlib.import_module("groupaffect._ckernels")
    except ImportError:
        pass
    else:
        names.insert(0, "cython")
    return names


def get_kernels(name):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("groupaffect._ckernels")
    raise ValueError(f"unknown backend {name!r}")


def _select():
    wanted = os.environ.get("GROUPAFFECT_BACKEND", "").strip().lower()
    if wanted == "python":
        return "python", _pykernels
    try:
        return "cython", get_kernels("cython")
    except ImportError:
        if wanted == "cython":
            raise
        logger.debug("compiled kernels unavailable; using numpy fallback")
        return "python", _pykernels


BACKEND, kernels = _select()
