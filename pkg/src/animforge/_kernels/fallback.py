"""Pure-numpy implementations of the pixel kernels.

Every kernel returns integers (or integer grids) only; callers assemble
floats from the moments. That keeps this backend bit-identical to the
compiled one: integer arithmetic has no rounding to disagree on.

Conventions shared by both backends:
  - grayscale: (77*r + 150*g + 29*b + 128) >> 8
  - Laplacian: 8-neighbour kernel (centre 8, neighbours -1), interior
    pixels only (no padding)
  - pixel classes: 48 hue bins (7.5 degrees each) for chromatic pixels,
    48 + (value >> 6) for achromatic ones (52 classes total)
  - component labels: 4-connected, renumbered by first raster occurrence
  - embedding moments: 4x4 block grayscale sums/counts over the mask plus
    a 48-bin hue histogram of the masked chromatic pixels
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage


def gray_u8(img: np.ndarray) -> np.ndarray:
    r = img[:, :, 0].astype(np.int32)
    g = img[:, :, 1].astype(np.int32)
    b = img[:, :, 2].astype(np.int32)
    return ((77 * r + 150 * g + 29 * b + 128) >> 8).astype(np.uint8)


def laplacian_moments(gray: np.ndarray) -> tuple[int, int, int]:
    """Count, sum and sum-of-squares of interior Laplacian responses."""
    h, w = gray.shape
    if h < 3 or w < 3:
        return 0, 0, 0
    g = gray.astype(np.int64)
    resp = 8 * g[1:-1, 1:-1] - (
        g[:-2, :-2] + g[:-2, 1:-1] + g[:-2, 2:]
        + g[1:-1, :-2] + g[1:-1, 2:]
        + g[2:, :-2] + g[2:, 1:-1] + g[2:, 2:]
    )
    return int(resp.size), int(resp.sum()), int((resp * resp).sum())


def class_grid(img: np.ndarray) -> np.ndarray:
    r = img[:, :, 0].astype(np.int32)
    g = img[:, :, 1].astype(np.int32)
    b = img[:, :, 2].astype(np.int32)
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    d = mx - mn
    d_safe = np.where(d == 0, 1, d)

    bin_r = np.floor_divide(8 * (g - b), d_safe) % 48
    bin_g = (16 + np.floor_divide(8 * (b - r), d_safe)) % 48
    bin_b = (32 + np.floor_divide(8 * (r - g), d_safe)) % 48

    out = np.where(r == mx, bin_r, np.where(g == mx, bin_g, bin_b))
    out = np.where(d == 0, 48 + (mx >> 6), out)
    return out.astype(np.int32)


def label_components(classes: np.ndarray) -> np.ndarray:
    """4-connected components of equal-class runs, canonically numbered."""
    labels = np.full(classes.shape, -1, dtype=np.int64)
    offset = 0
    for cls in np.unique(classes):
        inside = classes == cls
        comp, n = ndimage.label(inside)
        labels[inside] = comp[inside] + offset - 1
        offset += n

    # renumber so label k is the k-th component met in raster order
    flat = labels.ravel()
    values, first = np.unique(flat, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(values.size, dtype=np.int32)
    remap[order] = np.arange(values.size, dtype=np.int32)
    lookup = np.empty(int(values.max()) + 1, dtype=np.int32)
    lookup[values] = remap
    return lookup[flat].reshape(classes.shape)


def masked_moments(
    img: np.ndarray, mask: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    h, w = mask.shape
    m = mask.astype(bool)
    gray = gray_u8(img).astype(np.int64)

    block_sums = np.zeros(16, dtype=np.int64)
    block_counts = np.zeros(16, dtype=np.int64)
    for bi in range(4):
        r0, r1 = bi * h // 4, (bi + 1) * h // 4
        for bj in range(4):
            c0, c1 = bj * w // 4, (bj + 1) * w // 4
            sel = m[r0:r1, c0:c1]
            block_sums[bi * 4 + bj] = int(gray[r0:r1, c0:c1][sel].sum())
            block_counts[bi * 4 + bj] = int(sel.sum())

    cls = class_grid(img)
    chrom = m & (cls < 48)
    hist = np.bincount(cls[chrom], minlength=48).astype(np.int64)[:48]
    return block_sums, block_counts, hist, int(m.sum())


def abs_diff_total(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.abs(a.astype(np.int64) - b.astype(np.int64)).sum())
