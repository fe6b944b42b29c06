"""qrcurves: numerics for quasiregular curves.

Exterior algebra with comass norms, form fields with exact potentials,
maps with dual-number jets, distortion verification, local graph
decomposition, energy functionals (quasiminimality, Caccioppoli,
capacity, Liouville decay), and convergence labs for sequences of curves.
"""

__version__ = "0.1.0"

from .exterior import (AltTensor, comass, hodge_star, interior_product,
                       is_simple, mass, multi_indices, wedge)
from .forms import (ConformalMetric, FormField, PotentialField,
                    bounded_ratio, closedness_residual, conformal_comass,
                    eval_form, euclidean_volume, expression_form,
                    heisenberg_star, hyperbolic_volume, poincare_potential,
                    potential_field, symplectic)
from .grids import AnnulusMask, BallMask, GridDomain
from .maps import (Jet, MapSpec, jet, jet_batch, operator_norm,
                   star_pullback, top_minor_norm)
from .distortion import (DistortionReport, DistortionSample,
                         conformal_invariance_check, pointwise_distortion,
                         verify_qrc)
from .decomposition import (DecompositionResult, Isometry, dominant_simple_part,
                            graph_decompose, jacobian_positivity,
                            localization, rotation_isometry, support_plane)
from .functionals import (CaccioppoliReport, CutoffSpec, EnergyReport,
                          caccioppoli_check, capacity_cutoff,
                          capacity_energy_quadrature, energy, liouville_bound,
                          liouville_decay_curve, quasiminimality_compare,
                          smooth_bump, tracked_constant)
from .limits import (ConvergenceReport, SequenceSpec, convergence_report,
                     energy_lsc_check, limit_distortion, uniform_distance,
                     weak_pullback_residual)
