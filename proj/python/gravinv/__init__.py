"""Gravity inversion for ore bodies approximated by spheroids."""

from ._gravinv import *  # noqa: F401,F403
from ._gravinv import __doc__  # noqa: F401

__version__ = "0.1.0"
