#!/usr/bin/env python3
"""Benchmark: compiled kernels vs the pure-numpy fallback.

Run after installing the package:

    python benchmarks/bench_kernels.py [--size 256] [--repeats 20]

Prints per-kernel timings for whichever backends are importable plus the
speedup of the compiled path. The two backends are asserted bit-identical
on the benchmark inputs before timing.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from animforge._kernels import fallback

try:
    from animforge._kernels import _native as native
except ImportError:
    native = None


def make_inputs(size: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    # scene-like content: hue regions plus noise, the shape the pipeline sees
    img = np.empty((size, size, 3), dtype=np.uint8)
    img[:] = (40, 90, 160)
    img[size // 4: 3 * size // 4, size // 3: 2 * size // 3] = (200, 60, 20)
    img = np.clip(
        img.astype(np.int16) + rng.integers(-12, 13, size=(size, size, 1)), 0, 255
    ).astype(np.uint8)
    mask = np.zeros((size, size), dtype=np.uint8)
    mask[size // 4: 3 * size // 4] = 1
    return img, mask


def bench(fn, repeats: int) -> float:
    fn()  # warm up
    started = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - started) / repeats * 1000.0


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    img, mask = make_inputs(args.size)
    gray = fallback.gray_u8(img)
    classes = fallback.class_grid(img)

    kernels = {
        "gray_u8": lambda backend: backend.gray_u8(img),
        "laplacian_moments": lambda backend: backend.laplacian_moments(gray),
        "class_grid": lambda backend: backend.class_grid(img),
        "label_components": lambda backend: backend.label_components(classes),
        "masked_moments": lambda backend: backend.masked_moments(img, mask),
    }

    if native is not None:
        for name, call in kernels.items():
            a, b = call(native), call(fallback)
            if isinstance(a, tuple):
                assert all(
                    np.array_equal(x, y) if hasattr(x, "shape") else x == y
                    for x, y in zip(a, b)
                ), f"{name}: backend mismatch"
            else:
                assert np.array_equal(a, b), f"{name}: backend mismatch"

    print(f"input {args.size}x{args.size}, {args.repeats} repeats, ms per call")
    header = f"{'kernel':<20}{'python':>10}" + (f"{'native':>10}{'speedup':>9}" if native else "")
    print(header)
    print("-" * len(header))
    for name, call in kernels.items():
        python_ms = bench(lambda: call(fallback), args.repeats)
        row = f"{name:<20}{python_ms:>10.3f}"
        if native is not None:
            native_ms = bench(lambda: call(native), args.repeats)
            row += f"{native_ms:>10.3f}{python_ms / native_ms:>8.1f}x"
        print(row)
    if native is None:
        print("(compiled backend not built; showing fallback only)")


if __name__ == "__main__":
    main()
