"""Double regression learning of Markov networks for nonlinear, non-Gaussian data."""
from ._kernels import BACKEND
from .core import DataMatrix, EdgeTestRecord, LearnConfig, UndirectedGraph

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DataMatrix",
    "EdgeTestRecord",
    "LearnConfig",
    "UndirectedGraph",
    "__version__",
]
