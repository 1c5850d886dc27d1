"""Build script for the optional compiled element kernels.

The package is pure Python plus one optional Cython extension holding the
hot per-cell quadrature loops.  If Cython or a C compiler is unavailable the
build falls back to the NumPy reference kernels selected at import time.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext = Extension(
        "anisodwr.kernels._speedups",
        ["src/anisodwr/kernels/_speedups.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        optional=True,
    )
    ext_modules = cythonize([ext], language_level=3)
except ImportError:
    pass

setup(ext_modules=ext_modules)
