"""Build script for the optional compiled kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so a missing Cython toolchain only costs speed.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "couplekit._kernels._native",
                ["src/couplekit/_kernels/_native.pyx"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
