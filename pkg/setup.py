"""Build script: compiles the optional Cython solver kernel.

The package works without the extension (a pure-numpy fallback is selected at
import time), so any failure to compile degrades gracefully instead of
breaking the install. Set TOMOLAB_NO_EXTENSION=1 to skip compilation.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("TOMOLAB_NO_EXTENSION"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext = Extension(
            "tomolab._kernel.pgd_cy",
            ["src/tomolab/_kernel/pgd_cy.pyx"],
            include_dirs=[numpy.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            extra_compile_args=["-O3"],
        )
        ext_modules = cythonize([ext], language_level=3)
    except Exception as exc:  # noqa: BLE001 - fall back to pure python
        print(f"tomolab: skipping compiled kernel ({exc!r})")
        ext_modules = []

setup(ext_modules=ext_modules)
