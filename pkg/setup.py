import os
import sys

import numpy as np
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install
    cythonize = None


class OptionalBuildExt(build_ext):
    """Skip the compiled core if the toolchain is missing; the package then
    runs on its pure-Python kernels."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # noqa: BLE001
            print(f"warning: compiled kernels not built ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # noqa: BLE001
            print(f"warning: failed to build {ext.name} ({exc})", file=sys.stderr)


openmp = [] if os.environ.get("FRAUDTRAP_NO_OPENMP") else ["-fopenmp"]

extensions = [
    Extension(
        "fraudtrap._kernels",
        ["src/fraudtrap/_kernels.pyx"],
        include_dirs=[np.get_include()],
        language="c++",
        extra_compile_args=["-O3"] + openmp,
        extra_link_args=openmp,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]


def _ext_modules():
    if cythonize is None:
        return []
    try:
        return cythonize(extensions, compiler_directives={"language_level": "3"})
    except Exception as exc:  # noqa: BLE001
        print(f"warning: cythonize failed ({exc})", file=sys.stderr)
        return []


setup(
    ext_modules=_ext_modules(),
    cmdclass={"build_ext": OptionalBuildExt},
)
