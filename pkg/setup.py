"""Build script: compiles the optional layout force kernel.

The package works without the extension (a numpy fallback is selected at
import time), so any failure here degrades to a pure-Python install
instead of aborting.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "aiive.layout._kernel_cy",
                sources=["src/aiive/layout/_kernel_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
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
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"aiive: skipping compiled layout kernel ({exc})", file=sys.stderr)

setup(ext_modules=ext_modules)
