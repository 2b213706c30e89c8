"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it just makes patch-classifier training
several times faster. `pip install -e . --no-build-isolation` compiles it
in place.
"""

import os

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError

import numpy
from Cython.Build import cythonize
from setuptools.extension import Extension


COMPILE_ARGS = ["-O3", "-ffast-math", "-fopenmp", "-std=c99"]
LINK_ARGS = ["-fopenmp"]
if os.environ.get("CLE_SCREEN_NATIVE", "1") == "1":
    COMPILE_ARGS.append("-march=native")

ext_modules = cythonize(
    [
        Extension(
            "cle_screen._kernels",
            sources=["src/cle_screen/_kernels.pyx"],
            include_dirs=[numpy.get_include()],
            extra_compile_args=COMPILE_ARGS,
            extra_link_args=LINK_ARGS,
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    ],
    language_level=3,
)


class OptionalBuildExt(build_ext):
    """Build the extension if possible, otherwise install pure Python."""

    def run(self):
        try:
            super().run()
        except (CCompilerError, ExecError, PlatformError) as exc:
            print(f"WARNING: compiled kernels not built ({exc}); "
                  "falling back to the NumPy backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except (CCompilerError, ExecError, PlatformError, ValueError) as exc:
            print(f"WARNING: {ext.name} not built ({exc}); "
                  "falling back to the NumPy backend")


setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
