"""Build the optional Cython kernels; the package falls back to numpy if this fails."""
import glob
import os

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing etc.
            print(f"warning: Cython kernels not built ({exc}); using numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: failed to build {ext.name} ({exc}); using numpy fallback")


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
    except ImportError:
        return []
    ext = Extension(
        "imro._ckernels",
        [os.path.join("src", "imro", "_ckernels.pyx")],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    try:
        return cythonize([ext], compiler_directives={"language_level": "3"})
    except Exception as exc:
        print(f"warning: cythonize failed ({exc}); using numpy fallback")
        # a stale in-tree build would shadow the fallback with outdated kernels
        for stale in glob.glob(os.path.join("src", "imro", "_ckernels.*.so")):
            os.remove(stale)
        return []


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
