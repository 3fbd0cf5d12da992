import platform

import numpy as np
from setuptools import Extension, setup

flags = ["-O3", "-ffp-contract=off", "-std=c++17"]
if platform.machine() in ("x86_64", "AMD64"):
    flags.append("-mpopcnt")  # hardware popcount; every x86-64 CPU since 2008 has it

try:
    from Cython.Build import cythonize
except ImportError:  # fallback kernels are used when the extension is missing
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "realtrees._core",
                ["src/realtrees/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=flags,
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
