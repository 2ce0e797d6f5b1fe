"""Linear source-transition-mark recurrences on DAGs and grids, with reference oracles.

Modules: ``dag`` and ``paths`` (graph structure), ``stm`` (recurrent and
gating-matrix evaluation on any DAG), ``grid`` (parallel scans and chunkwise
forms on chains and 2D grids), ``stability``, ``vision``, ``arrows``,
``verify`` and ``cli``.
"""
from importlib.metadata import PackageNotFoundError, version

from .errors import PlstmError

try:
    __version__ = version("artifact")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"

__all__ = ["PlstmError", "__version__"]
