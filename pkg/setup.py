"""Builds the optional compiled agglomeration kernel.

The package works without it: ``kgcanon.cluster_init`` falls back to the
pure-Python kernel when the extension is missing.
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
                "kgcanon._agglo",
                ["src/kgcanon/_agglo.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )

setup(ext_modules=ext_modules)
