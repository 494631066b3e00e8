import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("WMRECON_NO_EXT"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("wmrecon._kernels", ["src/wmrecon/_kernels.pyx"], language="c++")],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
