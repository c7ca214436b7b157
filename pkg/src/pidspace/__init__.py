"""Digital PID gain-space design in the z-domain.

Computes absolute-stability, phase-margin, gain-margin and
mixed-sensitivity boundary curves in a two-gain plane, superimposes them
into multi-objective solution regions, and verifies chosen gain points
with an independent frequency-domain and pole-location oracle.
"""

from .analyzer import (
    AnalysisReport,
    MarginReport,
    SimResult,
    analyze_design,
    closed_loop_charpoly,
    closed_loop_poles,
    margins,
    robust_performance,
    simulate_closed_loop,
    spectral_radius,
)
from .boundary import (
    BoundaryCurve,
    BoundaryPoint,
    GainPlane,
    LineSegment,
    MarginSpec,
    WeightSpec,
    default_ms_theta_grid,
    default_theta_grid,
    default_theta_l_grid,
    gm_boundary,
    ms_boundary,
    ms_magnitude_solutions,
    pm_boundary,
    stability_crb,
    stability_rrb,
    weight_tf,
)
from .errors import ConfigError, NumericsError, PidspaceError, PreconditionError
from .region import (
    BIT_GM,
    BIT_MS,
    BIT_PM,
    BIT_STABLE,
    ConstraintSet,
    DesignSetup,
    RegionMap,
    SweepResult,
    auto_scan_ranges,
    build_region_map,
    classify_point,
    sweep_axis,
)
from .tfcore import (
    CONTINUOUS,
    DISCRETE,
    PidGains,
    Polynomial,
    RationalTransferFunction,
    c2d_zoh,
    pid_tf,
    poly_eval,
    poly_roots,
    series,
    tf_eval_unit_circle,
)

__version__ = "0.1.0"
