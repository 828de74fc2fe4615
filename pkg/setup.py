import os

from setuptools import Extension, setup

# The compiled kernel and the pure-Python engine must agree bit-for-bit, so
# FP contraction (fused multiply-add) has to stay off.
EXTRA_COMPILE_ARGS = ["-O3", "-ffp-contract=off"]

ext_modules = []
if os.environ.get("TONSIM_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "tonsim._kernel",
                    sources=["src/tonsim/_kernel.pyx"],
                    extra_compile_args=EXTRA_COMPILE_ARGS,
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # No Cython: install the pure-Python engine only.
        ext_modules = []

setup(ext_modules=ext_modules)
