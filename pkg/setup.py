import numpy
from setuptools import Extension, setup

# The compiled kernel core is optional: if Cython (or a C compiler) is not
# available the package falls back to the pure-numpy backend at import time.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "griffith2d._kernels._core",
                ["src/griffith2d/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
