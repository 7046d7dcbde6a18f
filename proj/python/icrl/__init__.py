from icrl._core import *  # noqa: F401,F403
from icrl._core import __version__  # noqa: F401
