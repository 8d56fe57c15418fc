"""Pixel-kernel backend selection.

Imports the compiled extension when available, otherwise the numpy
fallback. Set ANIMFORGE_PURE_PYTHON=1 to force the fallback (used by the
parity tests and the benchmark). Both backends return integer moments
only and are bit-identical; see fallback.py for the shared conventions.
"""
from __future__ import annotations

import os

from . import fallback as _fallback

if os.environ.get("ANIMFORGE_PURE_PYTHON") == "1":
    _impl = _fallback
    BACKEND = "python"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        BACKEND = "native"
    except ImportError:
        _impl = _fallback
        BACKEND = "python"

gray_u8 = _impl.gray_u8
laplacian_moments = _impl.laplacian_moments
class_grid = _impl.class_grid
label_components = _impl.label_components
masked_moments = _impl.masked_moments
abs_diff_total = _impl.abs_diff_total

__all__ = [
    "BACKEND",
    "abs_diff_total",
    "class_grid",
    "gray_u8",
    "label_components",
    "laplacian_moments",
    "masked_moments",
]
