"""Wasserstein ambiguity sets for random inputs of hyperbolic transport problems."""
from .ambiguity import (
    AmbiguityBall,
    InputParameterization,
    ParameterModel,
    RadiusSpec,
    ambiguity_radius,
    build_input_ball,
    h_inverse,
    input_support,
    radius_ratio,
)
from .cdf_core import (
    PiecewiseCdf,
    Segment,
    SteppedCdf,
    SupportInterval,
    eval_cdf,
    from_samples,
    generalized_inverse,
    left_inverse,
    reflect,
    w1_distance,
)
from .envelope import (
    AmbiguityBand,
    band_contains,
    band_from_ball,
    envelope_oracle,
    lower_envelope_discrete,
    upper_envelope_discrete,
)
from .errors import (
    AmbiflowError,
    DomainError,
    EmptySampleError,
    InvalidConstantsError,
    LinearityRequiredError,
    NotUpstreamError,
    TraceError,
    UninformativeBandError,
    UnsupportedBranchError,
)
from .propagation import (
    PhysicsModel,
    SpaceTimeGrid,
    propagate_ball,
    propagate_band,
    propagate_pointwise_bound,
    solve_cdf_pde,
    solve_w1_pde,
    trace_characteristic,
)

__version__ = "0.1.0"
