"""Build the optional compiled kernels.

The package works without them: ``sqla.kernels`` falls back to the numpy
implementation when ``sqla._kernels`` cannot be imported.
"""
import os

import numpy
from setuptools import setup
from setuptools.extension import Extension

ext_modules = []
if not os.environ.get("SQLA_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "sqla._kernels",
                    ["src/sqla/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    # keep a*b+c unfused so both backends round identically
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
