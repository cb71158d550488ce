"""Build script: compiles the optional Cython kernel extension.

The compiled extension is a pure accelerator. If Cython or a C compiler is
unavailable the build degrades to the pure-Python backend and the package
still installs and works (slower). `pip install -e .` or
`python setup.py build_ext --inplace` both work.
"""

import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "geofair.backends._core",
                ["src/geofair/backends/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    print("geofair: Cython not available, building without compiled kernels", file=sys.stderr)


class OptionalBuildExt(build_ext):
    """build_ext that downgrades compiler failures to a warning."""

    def run(self):
        try:
            super().run()
        except Exception as exc:
            print(f"geofair: skipping compiled kernels ({exc})", file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"geofair: failed to build {ext.name} ({exc}); "
                  "falling back to the pure-Python backend", file=sys.stderr)


setup(cmdclass={"build_ext": OptionalBuildExt}, ext_modules=ext_modules)
