"""
setup.py shim for tools that still call it directly.
Package metadata lives in pyproject.toml.
"""

from setuptools import setup

setup()
