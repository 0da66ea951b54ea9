"""Evolution inclusions with Yosida regularization, adjoint-based optimal
control, and the homogenized-plasticity instantiation."""

from ._monoflow import *  # noqa: F401,F403
from ._monoflow import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
