"""Numerical laboratory for sparse-autoencoder feature recovery under superposition."""

from saelab._core import *  # noqa: F401,F403
from saelab import _core as core  # noqa: F401

__all__ = [name for name in dir(core) if not name.startswith("_")]
