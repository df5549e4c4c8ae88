"""Numerical construction and certification of separable solutions ``w_i(t) v_ij(x)``
of a wave equation with a confining temporal potential on asymptotically flat charts."""
from .errors import (CapacityError, ConsistencyError, DefinitenessError, EstimateInvalidError,
                     MatchingError, PreconditionError, QdevError, ResolutionError, SimplicityError,
                     TruncationError, UnsupportedChartError)
from .numerics import SymMatrix, gauss_rule, integrate_weighted, solve_sym_generalized_eig
from .plot import emit_plot
from .quasimodes import QuasimodeSpec, ResidualCertificate, build_quasimode, quasimode_residual, weyl_family
from .records import SpectrumRecord, export_spectrum, read_spectrum
from .spatial import (BoxGrid, FlatnessReport, MetricFamily, Potential, RadialGrid, SpatialChart,
                      SpatialField, apply_A, chart_fixture, chart_from_dict, plane_wave_residual,
                      radial_generalized_eigenfunction, validate_asymptotic_flatness)
from .synthesis import match_eigenvalues, refinement_study, synthesize_product, wave_residual
from .temporal import (GeneralizedEigenpair, Mesh1D, TemporalProblem, k_gram, temporal_spectrum,
                       truncation_error_estimate)

__version__ = "0.1.0"
