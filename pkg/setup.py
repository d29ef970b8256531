"""Builds the optional compiled kernels.

The package is fully functional without the extension (the pure-Python
kernels are selected at import time), so compilation is best-effort:
no Cython, no extension, no error.

-ffp-contract=off matters: it forbids FMA contraction so the compiled
lane stays bit-identical to the pure lane.
"""
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "backlog_groomer.kernels._fastkernels",
                ["src/backlog_groomer/kernels/_fastkernels.pyx"],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
