"""Indirect auxiliary-variable MCMC for doubly intractable models.

The heavy lifting lives in the compiled ``_core`` extension: model
simulators (Ising Gibbs/CFTP, ERGM change-statistic Gibbs), maximum
pseudolikelihood, the GP-surrogate precompute store, and the DMH, IAVM and
exchange samplers.
"""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
