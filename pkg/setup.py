import os

import numpy
from setuptools import Extension, setup

# The compiled kernel is optional; the package falls back to pure Python.
ext_modules = []
if os.environ.get("FUSIONFLOW_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            Extension(
                "fusionflow._permanent",
                ["src/fusionflow/_permanent.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            ),
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
