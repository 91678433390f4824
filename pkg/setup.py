"""Build script: compiles the optional seriation kernel extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time), so compilation failures are downgraded to a
warning instead of aborting the install.
"""

import warnings

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/classblocks/_kernels.pyx"],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - toolchain-dependent
    warnings.warn(f"building without compiled kernels: {exc}")
    ext_modules = []

setup(ext_modules=ext_modules)
