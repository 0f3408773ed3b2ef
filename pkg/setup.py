"""Build the optional compiled routing core.

The package works without the extension (a pure-Python fallback is selected
at import time), so extension build failures are non-fatal.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "ipnsim._core._speedups",
                ["src/ipnsim/_core/_speedups.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
