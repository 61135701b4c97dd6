"""Set-oriented stability analysis and parameter optimization for ODE fields.

The compiled core exposes grids, upwind generators, absorption solves,
objective gradients, the two optimizers, and the trajectory oracle.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
