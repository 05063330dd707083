"""Build script: compiles the optional 4x4-matrix kernel extension.

Set FSPM_BRIDGE_NO_EXT=1 to skip compilation; the package then runs on the
pure-Python kernels in fspm_bridge._mat4_py.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("FSPM_BRIDGE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [Extension("fspm_bridge._mat4", ["src/fspm_bridge/_mat4.pyx"])],
            language_level="3",
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
