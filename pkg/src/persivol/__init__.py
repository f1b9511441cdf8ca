"""Persistent-intrinsic-volume estimation from Hausdorff-noisy samples."""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    CoverageError,
    OracleScopeError,
    PersivolError,
    StructuralError,
    UnsupportedBaselineError,
)
from .geometry import (
    PointCloud,
    ScalarGrid,
    ShapeSpec,
    distance_field,
    exact_intrinsic_volumes,
    exact_steiner_value,
    generate_shape,
    grid_for_cloud,
    perturb_hausdorff,
    point_distance_field,
)
from .cubical import (
    Cell,
    FilteredPairComplex,
    build_pair_complex,
    random_pair_complex,
    restrict_to_ball,
    validate_pair,
)
from .persistence import (
    Bar,
    PersistenceDiagram,
    RankFunction,
    bottleneck_distance,
    count_bars,
    diagram_from_ranks,
    euler_characteristic,
    image_persistence,
    ordinary_persistence,
    rank_function,
    rank_oracle,
)
from .steiner import (
    ChiProfile,
    PolynomialR,
    chi_profile,
    error_constant,
    integrate_chi_poly,
    legendre_basis,
    project_and_extract,
    theoretical_bound,
    unit_ball_volume,
)
from .montecarlo import (
    EstimatorConfig,
    EstimatorContext,
    VolumeEstimate,
    estimate_volumes,
    per_sample,
    sample_diagram,
    sampling_domain,
    steiner_function_probe,
)
