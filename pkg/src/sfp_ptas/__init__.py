"""Steiner forest approximation pipeline for finite doubling metrics.

Layers, bottom up: exact integer metrics and net hierarchies (``metric``),
instances and ball sub-instances (``instance``), forests and their
rewrites (``forest``), desk-scale exact/2-approximate baselines
(``baselines``), the randomized hierarchical decomposition with portals
(``decomposition``), adaptive cells (``cells``), the sparse dynamic program
(``dp``), and the sparsity-guided recursion driving it all (``driver``).
``generators``/``io``/``validation`` feed and check the pipeline; the
``service`` package and ``cli`` expose it over HTTP and the command line.
"""

from .baselines import OracleBudget, brute_force_forest, mst_forest, primal_dual_forest
from .driver import DriverConfig, SolveResult, solve_instance
from .dp import DpCaps, SparseDp
from .errors import SfpError
from .forest import Forest
from .generators import GeneratorSpec, generate
from .instance import SfpInstance, TerminalPair
from .metric import MetricSpace, build_hierarchy, build_metric

__version__ = "0.1.0"

__all__ = [
    "DpCaps",
    "DriverConfig",
    "Forest",
    "GeneratorSpec",
    "MetricSpace",
    "OracleBudget",
    "SfpError",
    "SfpInstance",
    "SolveResult",
    "SparseDp",
    "TerminalPair",
    "brute_force_forest",
    "build_hierarchy",
    "build_metric",
    "generate",
    "mst_forest",
    "primal_dual_forest",
    "solve_instance",
    "__version__",
]
