from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "evodyn._kernels",
                ["src/evodyn/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython/compiler available: install pure-Python; the package falls
    # back to the NumPy kernels at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
