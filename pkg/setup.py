import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("COC_ASR_NO_EXT"):
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "coc_asr.align._kernel",
                    ["src/coc_asr/align/_kernel.pyx"],
                    extra_compile_args=["-O3"],
                    optional=True,
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        # no Cython: the pure-Python kernel is used at import
        ext_modules = []

setup(ext_modules=ext_modules)
