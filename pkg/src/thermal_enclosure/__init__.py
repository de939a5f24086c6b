"""Enclosure-method reconstruction of inclusions in a heat conductor.

The package simulates the heat equation with a discontinuous conductivity,
transforms boundary traces to modified Helmholtz data, tests them against
exponentially growing or decaying probe solutions and extracts geometric
quantities of the inclusion from the asymptotics of the indicator function.
"""

from .conductivity import ConductivitySpec, FluxSpec, verify_flux_admissibility
from .config import RunConfig, config_hash, load_config
from .errors import (ConfigurationError, DomainError, EnclosureError, InsufficientDataError, NormalizationError,
                     NumericalFailure, SignInconsistencyError, SolverFailure, UnsupportedGeometryError)
from .forward_heat import BoundaryTrace, HeatState, solve_forward
from .fv import Discretization
from .geometry import Ball, Box, Ellipse, Grid, InclusionScene, build_grid, depth, enclosing_radius, \
    point_distance, support_function
from .indicator import ExtractionResult, IndicatorSample, assemble_indicator, extract_limit, \
    verify_basic_identity, verify_two_sided_bounds
from .layer import LayerDensity, evaluate_layer_field, operator_norm, solve_layer_density
from .pipeline import RunSummary, run_oracles, run_reconstruction, run_validation, simulate, sweep
from .probes import GrowingProbe, PlaneProbe, PointSourceProbe, SolvedProbe, ball_neumann_exact, \
    discretize_probe, explicit_probe, solve_gamma_helmholtz, solve_neumann_probe
from .transform import TransformedTrace, laplace_time, resolution_guard, tau_sweep

__version__ = "0.1.0"
