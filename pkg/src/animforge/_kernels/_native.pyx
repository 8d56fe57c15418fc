# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pixel kernels. Mirrors fallback.py exactly: integer moments
only, so outputs are bit-identical to the numpy path. Inputs are read as
const views because Image buffers are immutable."""

import numpy as np

from libc.stdint cimport int32_t, int64_t, uint8_t


cdef inline int64_t fdiv(int64_t a, int64_t b) nogil:
    # floor division matching Python's // for a possibly negative numerator
    cdef int64_t q = a / b
    if a % b != 0 and ((a < 0) != (b < 0)):
        q -= 1
    return q


cdef inline int32_t pixel_class(int r, int g, int b) nogil:
    cdef int mx = r
    cdef int mn = r
    cdef int64_t raw
    cdef int d
    if g > mx: mx = g
    if b > mx: mx = b
    if g < mn: mn = g
    if b < mn: mn = b
    d = mx - mn
    if d == 0:
        return <int32_t> (48 + (mx >> 6))
    if r == mx:
        raw = fdiv(8 * <int64_t> (g - b), d) % 48
    elif g == mx:
        raw = (16 + fdiv(8 * <int64_t> (b - r), d)) % 48
    else:
        raw = (32 + fdiv(8 * <int64_t> (r - g), d)) % 48
    if raw < 0:
        raw += 48
    return <int32_t> raw


def gray_u8(img):
    cdef const uint8_t[:, :, ::1] im = img
    cdef Py_ssize_t h = im.shape[0], w = im.shape[1], i, j
    out = np.empty((h, w), dtype=np.uint8)
    cdef uint8_t[:, ::1] o = out
    with nogil:
        for i in range(h):
            for j in range(w):
                o[i, j] = <uint8_t> ((77 * im[i, j, 0] + 150 * im[i, j, 1]
                                      + 29 * im[i, j, 2] + 128) >> 8)
    return out


def laplacian_moments(gray):
    cdef const uint8_t[:, ::1] g = gray
    cdef Py_ssize_t h = g.shape[0], w = g.shape[1], i, j
    if h < 3 or w < 3:
        return 0, 0, 0
    cdef int64_t n = 0, s = 0, ss = 0, resp
    with nogil:
        for i in range(1, h - 1):
            for j in range(1, w - 1):
                resp = 8 * <int64_t> g[i, j] - (
                    <int64_t> g[i - 1, j - 1] + g[i - 1, j] + g[i - 1, j + 1]
                    + g[i, j - 1] + g[i, j + 1]
                    + g[i + 1, j - 1] + g[i + 1, j] + g[i + 1, j + 1])
                n += 1
                s += resp
                ss += resp * resp
    return int(n), int(s), int(ss)


def class_grid(img):
    cdef const uint8_t[:, :, ::1] im = img
    cdef Py_ssize_t h = im.shape[0], w = im.shape[1], i, j
    out = np.empty((h, w), dtype=np.int32)
    cdef int32_t[:, ::1] o = out
    with nogil:
        for i in range(h):
            for j in range(w):
                o[i, j] = pixel_class(im[i, j, 0], im[i, j, 1], im[i, j, 2])
    return out


cdef int32_t uf_find(int32_t[::1] parent, int32_t x) nogil:
    cdef int32_t root = x, tmp
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        tmp = parent[x]
        parent[x] = root
        x = tmp
    return root


def label_components(classes):
    cdef const int32_t[:, ::1] cls = np.ascontiguousarray(classes, dtype=np.int32)
    cdef Py_ssize_t h = cls.shape[0], w = cls.shape[1], i, j
    cdef Py_ssize_t n = h * w
    parent_arr = np.arange(n, dtype=np.int32)
    cdef int32_t[::1] parent = parent_arr
    cdef int32_t idx, ra, rb
    with nogil:
        for i in range(h):
            for j in range(w):
                idx = <int32_t> (i * w + j)
                if j > 0 and cls[i, j] == cls[i, j - 1]:
                    ra = uf_find(parent, idx)
                    rb = uf_find(parent, idx - 1)
                    if ra != rb:
                        parent[ra] = rb
                if i > 0 and cls[i, j] == cls[i - 1, j]:
                    ra = uf_find(parent, idx)
                    rb = uf_find(parent, <int32_t> (idx - w))
                    if ra != rb:
                        parent[ra] = rb

    out = np.empty((h, w), dtype=np.int32)
    canon_arr = np.full(n, -1, dtype=np.int32)
    cdef int32_t[:, ::1] o = out
    cdef int32_t[::1] canon = canon_arr
    cdef int32_t next_id = 0, root
    with nogil:
        for i in range(h):
            for j in range(w):
                root = uf_find(parent, <int32_t> (i * w + j))
                if canon[root] == -1:
                    canon[root] = next_id
                    next_id += 1
                o[i, j] = canon[root]
    return out


def masked_moments(img, mask):
    cdef const uint8_t[:, :, ::1] im = img
    cdef const uint8_t[:, ::1] mk = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = im.shape[0], w = im.shape[1], i, j, bi, bj
    block_sums = np.zeros(16, dtype=np.int64)
    block_counts = np.zeros(16, dtype=np.int64)
    hist = np.zeros(48, dtype=np.int64)
    cdef int64_t[::1] bs = block_sums
    cdef int64_t[::1] bc = block_counts
    cdef int64_t[::1] hi = hist
    cdef int64_t total = 0
    cdef int gray, block
    cdef int32_t cls
    with nogil:
        for i in range(h):
            # inverse of the block-edge rule r0 = bi*h//4 used by the fallback
            bi = (4 * i + 3) // h
            for j in range(w):
                if mk[i, j] == 0:
                    continue
                total += 1
                bj = (4 * j + 3) // w
                block = <int> (bi * 4 + bj)
                gray = (77 * im[i, j, 0] + 150 * im[i, j, 1]
                        + 29 * im[i, j, 2] + 128) >> 8
                bs[block] += gray
                bc[block] += 1
                cls = pixel_class(im[i, j, 0], im[i, j, 1], im[i, j, 2])
                if cls < 48:
                    hi[cls] += 1
    return block_sums, block_counts, hist, int(total)


def abs_diff_total(a, b):
    cdef const uint8_t[::1] av = np.ascontiguousarray(a, dtype=np.uint8).ravel()
    cdef const uint8_t[::1] bv = np.ascontiguousarray(b, dtype=np.uint8).ravel()
    cdef Py_ssize_t n = av.shape[0], i
    cdef int64_t acc = 0, d
    with nogil:
        for i in range(n):
            d = <int64_t> av[i] - bv[i]
            acc += d if d >= 0 else -d
    return int(acc)
