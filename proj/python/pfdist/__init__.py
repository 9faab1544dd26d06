"""Probability flow distance toolkit: distributions, flow-map solves, the PFD
estimator, baseline distances and the generalization evaluation framework."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__ as _core_doc  # noqa: F401
