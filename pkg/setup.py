"""Build script for the optional compiled bootstrap kernel.

The package works without the extension (a numpy fallback is selected at
import time); building it just makes the bootstrap loop faster.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "hirec._boot_cy",
                sources=["src/hirec/_boot_cy.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
