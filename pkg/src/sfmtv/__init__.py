"""Total-variation denoising and submodular function minimization by
active-set search over ordered partitions."""

from .core import (BasePoint, GenericSetFunction, OracleError, OrderedPartition,
                   SetFunction, SubmodularityError, check_submodular, compatible,
                   greedy_vertex, level_sets, lovasz_eval, sfm_gap, threshold_solution)
from .isotonic import extract_basic, restricted_tv, weighted_pav
from .oracles import (ChainFunction, ConcaveCardinalityFunction, CutFunction,
                      ModularFunction, SumFunction)
from .activeset import (BlockCache, Certificate, SolverError, check_optimality,
                        solve_sfm, solve_tv, split)

__version__ = "0.1.0"
