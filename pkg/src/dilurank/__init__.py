"""dilurank: rank and kernel-mass asymptotics of sparse random graphs.

Three independent routes to the same number, cross-validated at desk scale:
closed-form cavity curves (mass objective and its records), population
dynamics for the distributional fixed point, and direct simulation (leaf
removal plus exact finite-field rank).
"""

__version__ = "0.1.0"

from .degrees import (DegreeModel, OffspringModel, DegreeModelError,
                      parse_model, size_biased, gf_eval, is_phi2_logconcave)
from .cavity import (MCurve, RecordSet, KSTrajectory, ErQ,
                     xbar, xbarbar, eval_M, eval_M_derivative,
                     find_records, er_q, ks_trajectory)
from .graphs import (Graph, KSResult, from_edges, from_edge_text,
                     gen_erdos_renyi, gen_configuration,
                     karp_sipser, karp_sipser_fast, ks_round_marginals)
from .linalg import (M61, DEFAULT_PRIMES, FAST_PRIMES, KernelCertificate,
                     SpectrumSummary, rank_mod_p, kernel_dim_exact,
                     rational_rank_oracle, rational_kernel_basis,
                     kernel_projection_exact, bareiss_rank,
                     symmetric_eigenvalues, cdf_rank_perturbation_check,
                     is_prime, random_prime)
from .trees import (TreeSample, AtomEstimate, DensityEstimate,
                    sample_gwt, tree_from_edges, truncate,
                    h_recursion, exact_atom_finite_tree,
                    atom_at_zero_mc, resolvent_density)
from .rde import Population, theta_step, solve_rde, root_mean, RootMean

__all__ = [name for name in dir() if not name.startswith("_")]
