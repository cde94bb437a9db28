"""Build the optional compiled kernels.

The package works without them: ``dressedtls._backend`` falls back to the
numpy implementation when the extension cannot be imported.
"""
import os

import numpy
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("DRESSEDTLS_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover - build without cython
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "dressedtls._kernels",
                    ["src/dressedtls/_kernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
