"""Master loop equations for U(N) lattice Yang-Mills at weak coupling.

Lattice geometry and string algebra, the four string operations, minimal
areas, truncated exponentials, loop-equation operators with fixed-point
solving and bound certification, and exact (N = 1) and Monte Carlo oracles.
"""

from .area import Unbounded, area, m_of_p, underbar_area
from .certify import (Rectangle, certify_area_law_bound, certify_truncated_bound,
                      binomial_split_identity_check, reduction_rhs)
from .engine import NormParams, StateSpace, apply_m_modified, apply_m_truncated, build_reachable
from .exact import exact_u1_monomial, exact_u1_phi
from .lattice import (CapacityError, Edge, Lattice, Plaquette, boundary_of_set, build_lattice,
                      enumerate_clusters, plaquettes_containing, rectangular_loop)
from .montecarlo import McEstimate, mc_phi, mc_wilson_expectation, sample_haar_unitary
from .ops import (OperationResult, classify_state, deformations, good_edge, mergers, revivals,
                  splittings, stuck_component)
from .solver import contraction_factor, mle_residual, neumann_solve, norm_eval
from .strings import Counts, LatticeString, is_balanced, make_string, splitting_complexity
from .truncexp import ParameterSet, check_lemma_bounds, exp_trunc, tail, validate_parameters

__version__ = "0.1.0"
