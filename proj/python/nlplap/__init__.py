"""Nonlocal p-Laplacian evolution on the unit interval and on random graphs."""

from ._nlplap import *  # noqa: F401,F403
from ._nlplap import __version__  # noqa: F401
