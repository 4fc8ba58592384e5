"""Build hook for the optional compiled interpreter kernel.

If Cython or a C compiler is missing, the extension is skipped and the
pure-Python kernel is used instead.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("lazyc._vmcore_c", ["src/lazyc/_vmcore_c.pyx"], optional=True)],
        compiler_directives={"language_level": "3"},
        quiet=True,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
