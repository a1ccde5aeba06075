import os
import subprocess

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

CORE_SOURCES = [
    "src/dataset.cpp",
    "src/logistic.cpp",
    "src/proportions.cpp",
    "src/adapt.cpp",
    "src/synthetic.cpp",
    "src/reweight.cpp",
    "src/metrics.cpp",
    "src/experiment.cpp",
]


def eigen_include():
    for path in ("/usr/include/eigen3", "/usr/local/include/eigen3"):
        if os.path.isdir(path):
            return path
    flags = subprocess.check_output(
        ["pkg-config", "--cflags-only-I", "eigen3"], text=True
    )
    return flags.strip().split("-I", 1)[1]


ext = Pybind11Extension(
    "subpop._subpop",
    CORE_SOURCES + ["python/src/bindings.cpp"],
    include_dirs=["include", "vendor", eigen_include()],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
