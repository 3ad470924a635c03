"""Simulation library for the insider-adversary fake detection game.

An adversary observes a real data point ``X`` and submits ``X + r t`` with
``t`` chosen from a trick set ``T``.  The package provides the trick sets,
width estimators, the proximity and focused detectors, the sign-flipping
adversary and a harness that measures error rates and brackets the radius
at which fakes become detectable.
"""

from .adversary import FixedTrick, SignFlip, attack, success_probability
from .detection import FocusedDetector, ProximityDetector, Verdict, focused_verdict, proximity_verdict
from .distributions import IIDSymmetricBounded, SeedSpec, StandardGaussian, sample, sample_trials
from .errors import (
    BracketingError,
    ConfigError,
    DimensionError,
    FakeWidthError,
    NotHighlySymmetricError,
    NoValidFocusSetError,
    PreconditionError,
    UndecidableError,
)
from .experiments import (
    SweepConfig,
    bracket_detectability_radius,
    error_rates,
    invariance_check,
    sweep,
)
from .tricksets import (
    Fake,
    GiveUp,
    HalfCoordinate,
    NormThreshold,
    SparseNorm,
    SupportFamily,
    inradius,
    membership,
    scaled_support,
    sign_flip_candidate,
)
from .widths import (
    FocusSet,
    WidthEstimate,
    analytic_scaled_width,
    estimate_scaled_width,
    estimate_width,
    focused_width_upper_bound,
    verify_polar_condition,
)

__version__ = "0.1.0"
