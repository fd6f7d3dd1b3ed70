"""Linear estimation over ellitopes with near-optimality certificates."""

from ._nearopt import *  # noqa: F401,F403
