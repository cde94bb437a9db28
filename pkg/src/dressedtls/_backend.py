"""Kernel backend selection.

The compiled extension is used when importable; ``DRESSEDTLS_PURE=1`` forces
the numpy fallback (handy for benchmarks and for checking the two agree).
"""
import logging
import os

from . import _kernels_py

log = logging.getLogger(__name__)

kernels = _kernels_py
NAME = "python"

if os.environ.get("DRESSEDTLS_PURE") != "1":
    try:
        from . import _kernels as _compiled
    except ImportError:
        log.debug("compiled kernels unavailable, using numpy fallback")
    else:
        kernels = _compiled
        NAME = "cython"

bessel_table = kernels.bessel_table
bessel_table_many = kernels.bessel_table_many
dressed_coefficients = kernels.dressed_coefficients
magnus_propagate = kernels.magnus_propagate
