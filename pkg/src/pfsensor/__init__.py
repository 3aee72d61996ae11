"""Transfer-operator sensor placement for indoor contaminant monitoring
under uncertain flow conditions."""

from .config import ConfigError, RunConfig, parse_config
from .flowfield import (
    FieldFormatError,
    FlowScenario,
    VelocityField,
    load_field,
    save_field,
    save_scalar_field,
    synth_recirculating,
    zero_field,
)
from .grid import StructuredGrid, ZoneMask, box_mask, empty_mask
from .markov import (
    BoundarySpec,
    ConcentrationField,
    MarkovMatrix,
    MatrixFormatError,
    SourceTerm,
    StabilityError,
    admissible_dt,
    build_markov,
    expected_operator,
    load_markov,
    propagate,
    save_markov,
)
from .pde import PdeConfig, PdeStabilityError, compare_transport, solve_pde, stable_step
from .placement import (
    PlacedSensor,
    SensorPlan,
    coverage_vector,
    expected_coverage,
    occupied_fraction,
    place_sensors,
)
from .tracking import (
    BinaryTrackingMatrix,
    ConstraintSet,
    ScaledTrackingMatrix,
    SensorSpec,
    TrackingMatrix,
    apply_constraints,
    threshold,
    tracking_matrix,
    volumetric_scale,
)
from .uncertainty import (
    Distribution,
    DistributionFitError,
    Gaussian,
    GaussianKde,
    QuadratureRule,
    basis_weights,
    cdf_points_for,
    expectation,
    fit_kde,
    hat_functions,
    icdf_samples,
    quadrature_rule,
)

__version__ = "0.1.0"
