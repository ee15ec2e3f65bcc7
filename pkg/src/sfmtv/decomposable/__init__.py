"""Total-variation denoising for F = F1 + F2 with SFM oracles for each part."""

from .coalesce import coalesce
from .qp import (QPData, QPError, build_qp, decouple, laplacian_cg, qp_active_set,
                 qp_equality_solve, solve_decoupled)
from .dykstra import DykstraState, project_tangent_cone, translated_dykstra
from .baselines import BaselineResult, baseline_solvers, duality_gap
from .solver import DecomposableResult, solve_decomposable
