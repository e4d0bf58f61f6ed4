"""Tensor-network and quantum-inspired probabilistic sequence models."""

from ._core import *  # noqa: F401,F403
from ._core import Constraint, Topology, Variant

__all__ = [name for name in dir() if not name.startswith("_")]
