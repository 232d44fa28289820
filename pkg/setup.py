import os
import sys

from setuptools import setup

ext_modules = []
if not os.environ.get("VGFX_NO_EXTENSION"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        extra = [] if sys.platform == "win32" else ["-O3", "-ffp-contract=off"]
        ext_modules = cythonize(
            [Extension(
                "vgfx.engine._kernels",
                ["src/vgfx/engine/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=extra,
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # no Cython available: the pure NumPy kernel is used at runtime
        ext_modules = []

setup(ext_modules=ext_modules)
