"""Stochastic population-environment coevolution: simulation and verification."""
from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

from . import integrate, models, scenarios, verify  # noqa: E402

__all__ = ["integrate", "models", "scenarios", "verify", "__version__"]
