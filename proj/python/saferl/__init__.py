"""Shielded reinforcement learning for human-robot coexistence."""
import os as _os

_bundled = _os.path.join(_os.path.dirname(__file__), "data")
if _os.path.isdir(_bundled):
    _os.environ.setdefault("SAFERL_DATA_DIR", _bundled)

from ._core import *  # noqa: E402,F401,F403
from ._core import __doc__  # noqa: E402,F401

__version__ = "0.1.0"
