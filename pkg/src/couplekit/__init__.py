"""Coupled sampling for discrete distributions.

Two parties holding different distributions draw one sample each and
want the samples to collide as often as possible.  This package
implements the with-communication optimal coupling, two
communication-free protocols (a shared dart scan and a shared
exponential race) with their exact collision probabilities, a
logarithmic-communication protocol with explicit transcripts, and a
drafter-invariant speculative-decoding simulator built on top.
"""

from ._kernels import backend_name
from .analysis import (
    CollisionReport,
    MonteCarloEstimate,
    adversarial_family,
    collision_report,
    exact_collision_gumbel,
    exact_collision_wmh,
    monte_carlo_collision,
    worst_case_bound,
)
from .distributions import (
    DiscreteDistribution,
    GridDistribution,
    discretize,
    grid_denominator,
    load_distribution,
    make_distribution,
    save_distribution,
    sum_max,
    sum_min,
    tv_distance,
)
from .errors import DistributionError, PathologicalInput, ProtocolViolation
from .lowcomm import (
    LowCommResult,
    Message,
    MessageType,
    Party,
    Transcript,
    bit_cost,
    run_lowcomm,
    run_grid_session,
    simulate_sessions,
)
from .protocols import (
    CouplingOutcome,
    ProtocolKind,
    couple,
    gumbel_sample,
    optimal_coupling,
    wmh_sample,
)
from .randomness import SharedRandomSource
from .specdec import (
    GenerationMode,
    GenerationResult,
    MarkovModel,
    PerturbedModel,
    ToyLanguageModel,
    acceptance_report,
    generate_drafter_invariant,
    generate_no_drafter,
    generate_standard,
    random_markov_model,
)

__version__ = "0.1.0"

__all__ = [
    "CollisionReport",
    "CouplingOutcome",
    "DiscreteDistribution",
    "DistributionError",
    "GenerationMode",
    "GenerationResult",
    "GridDistribution",
    "LowCommResult",
    "MarkovModel",
    "Message",
    "MessageType",
    "MonteCarloEstimate",
    "Party",
    "PathologicalInput",
    "PerturbedModel",
    "ProtocolKind",
    "ProtocolViolation",
    "SharedRandomSource",
    "ToyLanguageModel",
    "Transcript",
    "acceptance_report",
    "adversarial_family",
    "backend_name",
    "bit_cost",
    "collision_report",
    "couple",
    "discretize",
    "exact_collision_gumbel",
    "exact_collision_wmh",
    "generate_drafter_invariant",
    "generate_no_drafter",
    "generate_standard",
    "grid_denominator",
    "gumbel_sample",
    "load_distribution",
    "make_distribution",
    "monte_carlo_collision",
    "optimal_coupling",
    "random_markov_model",
    "run_lowcomm",
    "run_grid_session",
    "save_distribution",
    "simulate_sessions",
    "sum_max",
    "sum_min",
    "tv_distance",
    "wmh_sample",
    "worst_case_bound",
]
