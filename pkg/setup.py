"""Build script for the optional compiled kernel extension.

The package is fully functional without the extension (a pure-NumPy
fallback is selected at import time), so a failed compile must never
break installation.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "naada.kernels._core",
                sources=["src/naada/kernels/_core.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level="3",
    )
    for ext in extensions:
        ext.optional = True
except ImportError:
    extensions = []

setup(ext_modules=extensions)
