"""circleifs: dynamics of iterated function systems of two circle
diffeomorphisms close to rotations.

The package detects and classifies star intervals, builds attractor cycles
and certified expanding first-return maps, decides minimality, and computes
the spectral decomposition of the limit set.
"""

from .maps import (
    CircleMap,
    PerturbedRotation,
    MorseSmaleMap,
    SplineMap,
    PowerMap,
    InverseMap,
    ReflectedMap,
    FixedPointRecord,
    DistortionEstimate,
    Stability,
    make_map,
    rotation_number,
    fixed_points,
    distortion,
    closeness_certificate,
    power_derivative_bounds,
    reduce_to_zero_rotation,
    assert_no_common_fixed_points,
    MapConstructionError,
    NonConvergence,
    UnresolvedTangency,
    EnvelopeViolation,
    CommonFixedPointError,
)
from .intervals import (
    StarInterval,
    Basin,
    Kind,
    AmbiguousKind,
    classify_interval,
    enumerate_star_intervals,
    basin_of,
)
from .cycles import (
    Cycle,
    OrderViolation,
    NoCoveringBasins,
    precedes,
    find_cycle,
    verify_cycle_order,
)
from .returnmaps import (
    ReturnMapAtlas,
    ExpansionCertificate,
    OverlapEmpty,
    StageOrderViolation,
    BoundNotExceeded,
    duminy_condition,
    build_local_return_map,
    build_global_return_map,
    derivative_ratio_bound,
    expansion_certificate,
    local_chain_margin,
    periodic_chain_margin,
    cycle_chain_margin,
    apply_word,
    word_derivative,
)
from .limitsets import (
    DecompositionReport,
    MinimalityCertificate,
    omega_limit,
    spectral_decomposition,
    minimality_certificate,
    reach_interval,
    denjoy_check,
)
from .scenario import (
    Scenario,
    ScenarioInvalid,
    MissingSection,
    load_scenario,
    run_pipeline,
    emit_plot_data,
    REPORT_SCHEMA,
)

__version__ = "0.1.0"
