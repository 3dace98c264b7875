"""Build script: compiles the optional Cython Monte Carlo kernel.

The package is fully functional without the extension (a pure-Python kernel
with identical semantics is selected at import time), so any failure here
degrades to a source-only install instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "mfg_kinetic._mc_speed",
                ["src/mfg_kinetic/_mc_speed.pyx"],
                # -ffp-contract=off keeps the compiled kernel bitwise equal to
                # the pure-Python twin (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception:
    ext_modules = []

setup(ext_modules=ext_modules)
