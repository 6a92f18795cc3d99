from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; coevo._backend falls back to numpy kernels
    ext_modules = []
else:
    ext_modules = cythonize(
        [Extension("coevo._kernels", ["src/coevo/_kernels.pyx"], extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
