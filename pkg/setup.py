"""Build script for the optional compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); set AUTHATTR_NO_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("AUTHATTR_NO_EXT"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "authattr.kernels._ckernels",
                    ["src/authattr/kernels/_ckernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
