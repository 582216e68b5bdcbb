"""Build script: compiles the optional Cython kernel when a toolchain is available.

The package works without the extension (a numpy-vectorized fallback is
selected at import time), so any failure here only costs speed.
"""

import os
from pathlib import Path

from setuptools import Extension, setup

try:
    import numpy as np
except ImportError:  # building without numpy means no extension either
    np = None

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

ext_modules = []
if np is not None and cythonize is not None and not os.environ.get("BATCHBANDIT_PURE"):
    npyrandom_dir = Path(np.random.__file__).parent / "lib"
    ext = Extension(
        "batchbandit._native",
        sources=["src/batchbandit/_native.pyx"],
        include_dirs=[np.get_include()],
        library_dirs=[str(npyrandom_dir)],
        libraries=["npyrandom"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize([ext], language_level="3")

setup(ext_modules=ext_modules)
