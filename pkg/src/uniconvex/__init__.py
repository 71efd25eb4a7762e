"""Computational toolkit for uniformly convex functions on finite grids."""

from .exceptions import CapExceeded, PreconditionError
from .domain import (DyadicGrid, NormSpec, PseudometricSpec, Support, TabFunc, box_grid,
                     estimate_varpi, eval_norm, interval_grid, lp_norm, make_dyadic_grid,
                     midpoint_pairs, support_from_points, tabulate)
from .moduli import (ModulusReport, check_gage_scaling, check_t_interpolation,
                     coercivity_profile, delta_modulus, delta_phi, gage,
                     minimizer_stability_probe, quasi_modulus)
from .envelope import (EnvelopeResult, convex_envelope, jensen_fixpoint, local_envelope_reduction,
                       slice_diameter_criterion)
from .transforms import (domain_enlargement, exp_transform, inf_convolution,
                         lipschitz_regularization, square_transform)
from .trees import (DyadicTree, convex_separation_sequence, height_function,
                    max_separated_tree_height)
from .dentability import DerivationTrace, derive_once, dz_index, uc_function_from_derivation
from .renorming import CompositeNorm, enflo_pipeline, renorm_from_function
from .dc_approx import DCDecomp, cepedello_approx, dc_bounds_check
from .swc import MuReport, chain_check, measure_suite, resolution_study, threshold_bracket

__version__ = "0.1.0"
