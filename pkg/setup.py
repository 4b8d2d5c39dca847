"""Build script for the optional compiled kernels.

The extension is skipped (pure-Python fallback used at import) when Cython or
a C compiler is unavailable, or when SWEEPOPT_NO_EXT is set.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("SWEEPOPT_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "sweepopt._core",
                    ["src/sweepopt/_core.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
