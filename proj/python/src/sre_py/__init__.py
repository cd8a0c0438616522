"""Python access to the riverine safe-RL toolkit."""

from ._sre import *  # noqa: F401,F403
from ._sre import __version__  # noqa: F401
