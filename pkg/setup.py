"""Build the optional Cython kernels; the package works without them."""
from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    pass
else:
    import platform
    import sys

    from setuptools import Extension

    # -ffast-math lets gcc vectorize exp() through glibc's libmvec
    vector_libs = ["mvec", "m"] if sys.platform == "linux" and platform.machine() == "x86_64" else []
    ext_modules = cythonize(
        [
            Extension(
                "fga._kernels._ckernels",
                ["src/fga/_kernels/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            ),
            Extension(
                "fga._kernels._cattention",
                ["src/fga/_kernels/_cattention.pyx"],
                extra_compile_args=["-O3", "-ffast-math"] if vector_libs else ["-O3"],
                libraries=vector_libs,
            ),
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
