"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (pure-Python kernels are selected at
import time), so any failure here degrades to a warning instead of aborting
the install.
"""

import warnings

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/faircert/_speedups.pyx"],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    warnings.warn(f"Cython kernels not built ({exc}); using pure-Python fallback")
    ext_modules = []

setup(ext_modules=ext_modules)
