"""heatctl: spectral-Galerkin observability constants and null-control synthesis."""

from .errors import (CapacityError, ConditioningError, DegenerateSetError,
                     FidelityError, HeatctlError, NumericError, ParameterError)
from .geometry import (EquidistributedSpec, ObservabilitySet, ThickParams,
                       beta_complement, example_set, gram_matrix,
                       make_equidistributed, periodic_band, thickness_estimate)
from .spectral import (DomainSpec, OperatorHandle, PotentialSpec, SpectralBasis,
                       build_basis, fractional_transform, galerkin_schrodinger,
                       semigroup_apply)
from .uncertainty import (UncertaintyFit, UniversalConstants,
                          calibrate_spectral_cube, eigenvalue_lifting_check,
                          fit_uncertainty_form, sharpness_example_sparse,
                          sharpness_example_torus, spectral_ineq_constant,
                          spectral_ineq_sweep, ucp_bound)
from .control import (ControlProblem, ControlSignal, CostReport, Phase,
                      PhaseSchedule, Trajectory, active_passive_schedule,
                      active_passive_synthesize, douglas_factorize, duhamel_solve,
                      empirical_cost, gramian, gramian_condition, min_norm_control,
                      worst_initial_state)
from .bounds import (BOUND_NAMES, bound_validity, calibrate_thick1,
                     calibrate_prefactor, cost_bound, miller_cstar, regime_table,
                     tenenbaum_threshold, thick2_exponent)
from .exhaustion import (ControlFamilyReport, DiffReport, ExhaustionRun,
                         box_basis, bump_state, centered_box, embed_zero_extension,
                         nested_control_family, overlap_matrix,
                         semigroup_difference)

__version__ = "0.1.0"
