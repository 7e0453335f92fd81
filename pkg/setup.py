import os

from setuptools import Extension, setup

# The compiled kernels are an optimization, not a requirement: the package
# falls back to predit._kernels.pure at import time. PREDIT_SKIP_NATIVE=1
# builds a pure-Python wheel on boxes without a C toolchain.
ext_modules = []
if not os.environ.get("PREDIT_SKIP_NATIVE"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "predit._kernels._native",
                    ["src/predit/_kernels/_native.pyx"],
                )
            ],
            compiler_directives={"language_level": 3},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
