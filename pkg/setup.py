import os

import numpy as np
from setuptools import Extension, setup

extensions = []
if os.environ.get("CONFPERF_NO_EXT") != "1":
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "confperf._native",
                ["src/confperf/_native.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3", "-fno-fast-math", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
