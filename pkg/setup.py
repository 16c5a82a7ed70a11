#!/usr/bin/env python
import os
from setuptools import setup, find_packages


NAME = "imoc"
DESCRIPTION = "Information-maximizing one-class anomaly detection"
README = "README.md"
REQUIREMENTS = "requirements.txt"
with open(README) as f:
    LONG_DESCRIPTION = f.read()
with open(REQUIREMENTS) as f:
    DEPENDENCIES = f.read().splitlines()
VERSION = {}
with open(os.path.join(NAME, "_version.py")) as f:
    exec(f.read(), VERSION)


setup(
    name=NAME,
    version=VERSION["__version__"],
    description=DESCRIPTION,
    long_description=LONG_DESCRIPTION,
    long_description_content_type="text/markdown",
    package_data={NAME: ["conf/*.yml", "static/*.yml"]},
    include_package_data=True,
    install_requires=DEPENDENCIES,
    packages=find_packages(exclude=["examples", "examples.*"]),
    entry_points={"console_scripts": ["imoc=imoc.cli:main"]},
    python_requires=">=3.8",
    zip_safe=False,
    license="Apache License Version 2.0",
    author="The IMOC development team",
    classifiers=[
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Programming Language :: Python :: 3",
        "Natural Language :: English"
    ]
)
