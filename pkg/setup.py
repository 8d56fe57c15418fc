"""Build hook: compiles the optional Cython kernel extension.

The package works without the extension (a numpy fallback is selected at
import time), so any failure here degrades to a pure-Python install
instead of aborting.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("ANIMFORGE_SKIP_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "animforge._kernels._native",
                    ["src/animforge/_kernels/_native.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            language_level=3,
        )
    except Exception as exc:  # pragma: no cover - build-env dependent
        print(f"animforge: skipping native kernels ({exc}); pure-Python fallback will be used")

setup(ext_modules=ext_modules)
