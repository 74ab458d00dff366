"""Build hooks for the optional compiled core.

The package is fully functional without the extension (a numpy fallback is
selected at import time); the Cython module accelerates the pairwise-distance,
neighbor-scan and reactor-integration inner loops.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext = Extension(
        "kgsa._core",
        sources=["src/kgsa/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext.optional = True
    ext_modules = cythonize([ext], language_level="3")
except ImportError:
    # No Cython available: install the pure-python package only.
    pass

setup(ext_modules=ext_modules)
