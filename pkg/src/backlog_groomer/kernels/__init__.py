"""Similarity kernels: compiled fast lane with a pure-Python fallback.

The compiled extension is preferred when importable; set
``GROOMER_PURE_PYTHON=1`` to force the fallback. ``BACKEND`` reports the
active lane. Both lanes are bit-for-bit identical, so every caller and
test runs unchanged on either.
"""
from __future__ import annotations

import os

from . import _purekernels

if os.environ.get("GROOMER_PURE_PYTHON") == "1":
    _impl = _purekernels
    BACKEND = "pure"
else:
    try:
        from . import _fastkernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _purekernels
        BACKEND = "pure"

fnv1a64 = _impl.fnv1a64
hash_embed = _impl.hash_embed
dot = _impl.dot
cosine = _impl.cosine
score_many = _impl.score_many
pairwise_scan = _impl.pairwise_scan

__all__ = [
    "BACKEND",
    "cosine",
    "dot",
    "fnv1a64",
    "hash_embed",
    "pairwise_scan",
    "score_many",
]
