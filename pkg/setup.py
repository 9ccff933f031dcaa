"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time), so any build failure here downgrades to a warning instead of
aborting the install. Set STLNAV_NO_EXT=1 to skip the extension entirely.
"""

import os
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            self._warn(exc)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            self._warn(exc)

    @staticmethod
    def _warn(exc):
        print(
            "WARNING: building the stlnav._core extension failed; "
            "falling back to the pure NumPy kernels.\n  %s" % exc,
            file=sys.stderr,
        )


def extensions():
    if os.environ.get("STLNAV_NO_EXT"):
        return []
    try:
        from Cython.Build import cythonize
    except ImportError:
        print("WARNING: Cython not available; using pure NumPy kernels.", file=sys.stderr)
        return []
    ext = Extension(
        "stlnav.kernels._core",
        sources=[os.path.join("src", "stlnav", "kernels", "_core.pyx")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
