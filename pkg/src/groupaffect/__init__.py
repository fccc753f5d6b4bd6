"""Multi-modal feature aggregation and stacked classification for group-level image affect."""

from ._backend import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
