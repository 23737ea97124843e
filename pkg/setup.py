import os

import numpy
from setuptools import Extension, setup

# PRPSIM_NO_EXT=1 installs the pure-Python fallback only
if os.environ.get("PRPSIM_NO_EXT"):
    ext_modules = []
else:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "prpsim._kernels",
                ["src/prpsim/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
