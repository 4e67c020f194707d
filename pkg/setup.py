from setuptools import find_packages
from setuptools import setup


with open("./requirements.txt", "r", encoding="utf-8") as fh:
    install_requires = fh.read()


with open("./README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()


setup(
    install_requires = install_requires,
    name = "udakit",
    version = "0.1.0",
    description = "An unsupervised domain adaptation toolkit with an in-house autodiff engine.",
    long_description = long_description,
    long_description_content_type = "text/markdown",
    url = "",
    packages = find_packages(exclude = ["tests", "tests.*", "examples", "examples.*"]),
    extras_require = {
        "test": ["pytest", "hypothesis"],
    },
    entry_points = {
        "console_scripts": ["bench = udakit.bench.cli:main"],
    },
    classifiers = [
        "Programming Language :: Python :: 3 :: Only",
        "License :: MIT No Attribution License",
        "Operating System :: OS Independent",
    ],
    python_requires = '>=3.8'
)
