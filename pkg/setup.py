"""Build script for the compiled window kernels.

The extension is optional: if Cython or a C compiler is unavailable the
package installs without it and falls back to the pure-NumPy kernels at
import time (see quanvseg.backend).
"""

from setuptools import Extension, setup

try:
    import numpy as np
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "quanvseg._kernels",
                sources=["src/quanvseg/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
