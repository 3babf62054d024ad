"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (a pure-numpy fallback is selected
at import time); building it makes ensemble construction and decoding
several times faster. If Cython or a C compiler is unavailable the build
silently skips the extension instead of failing.
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    extensions = cythonize(
        [
            Extension(
                "phaseless._kernels",
                ["src/phaseless/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception:  # pragma: no cover - toolchain missing
    extensions = []

setup(ext_modules=extensions)
