"""Dynamic access-pricing queue model.

A fluid model of a service queue fed by price-responsive and
price-unresponsive users, with pricing used as the access regulator.
The package calibrates equilibria, classifies their stability, builds
verified invariant regions, integrates the switched nonsmooth dynamics
and reproduces the surge-vs-saturated fairness comparison.
"""

from .model import (
    AdmissionSpec,
    ModelConfig,
    PriceSpec,
    ServiceSpec,
    admission_slope,
    eval_admission,
    eval_price,
    eval_service,
    saturation_floor,
    validate_admissible,
)
from .equilibria import (
    CalibrationError,
    CalibrationTargets,
    FixedPoint,
    calibrate_cubic_admission,
    calibrate_linear_admission,
    find_fixed_points,
    fixed_point_residual,
)
from .stability import (
    JacobianMatrix,
    KinkProximityError,
    StabilityReport,
    classify,
    divergence,
    finite_diff_jacobian,
    jacobian,
    saddle_criterion,
)
from .dynamics import (
    CHATTERING,
    NORMAL,
    SWITCHED_FULL,
    SystemMode,
    Trajectory,
    admitted_flows,
    competitive_mode,
    converge,
    integrate,
    rhs,
    saturated_mode,
)
from .regions import (
    PhaseGrid,
    RegionSpec,
    build_cuboid,
    build_polygon,
    check_invariance,
    eta1,
    eta2,
    eta3,
    phase_grid,
    q_dagger,
    r_dagger,
)
from .scenarios import (
    Burst,
    ComparisonResult,
    FairnessSeries,
    ScenarioConfig,
    bounceback_probe,
    fairness_gap,
    run_comparison,
    scenario_from_config,
)

__version__ = "0.1.0"
