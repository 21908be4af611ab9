"""Builds the optional Cython kernel extension.

If the compiler or Cython is unavailable the package still installs; the
pure-numpy kernels in psychfm._fm_py are used instead (see psychfm.backend).
"""

from setuptools import setup

try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/psychfm/_fm_cy.pyx",
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
    include_dirs = [numpy.get_include()]
except ImportError:
    ext_modules = []
    include_dirs = []

setup(ext_modules=ext_modules, include_dirs=include_dirs)
