"""Builds the optional compiled kernel core.

The package works without it: `textrec.kernels` falls back to the numpy
reference implementation when the extension is missing.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "textrec.kernels._core",
                ["src/textrec/kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffast-math", "-funroll-loops"],
                extra_link_args=["-lmvec", "-lm"],  # -ffast-math vectorizes exp/tanh via libmvec
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
