"""Finite-time safety certificates for polynomial stochastic systems.

Certifies upper bounds on the probability that a polynomial SDE leaves a
safe region within a finite horizon, via sum-of-squares barrier programs;
synthesizes polynomial state feedback meeting a target failure probability;
and cross-checks every certificate against Monte Carlo simulation.
"""

from .certify import (
    AlphaGrid,
    Certificate,
    InvalidLevel,
    NoFeasiblePoint,
    SolverConfig,
    compute_barrier,
    probability_bound,
)
from .mc import (
    GeneratorCheck,
    McEstimate,
    SimulationConfig,
    estimate_failure_probability,
    generator_check,
    simulate_path,
    wilson_interval,
)
from .model import (
    SafetyProblem,
    SemialgebraicSet,
    StochasticSystem,
    generator,
    validate_problem,
)
from .poly import (
    AffineExpr,
    BilinearProduct,
    MissingAssignment,
    ParametricPolynomial,
    PolyParseError,
    monomial_basis,
    parse_polynomial,
)
from .sos import (
    DegreeSpec,
    GramParam,
    OddDegree,
    SosProgram,
    build_barrier_program,
    build_controller_program,
    sampled_soundness,
)
from .synth import (
    Infeasible,
    NotConverged,
    SynthesisConfig,
    SynthesisResult,
    compute_u,
    min_linear_gain,
    synthesize,
)

__version__ = "0.1.0"

__all__ = [
    "AffineExpr",
    "AlphaGrid",
    "BilinearProduct",
    "Certificate",
    "DegreeSpec",
    "GeneratorCheck",
    "GramParam",
    "Infeasible",
    "InvalidLevel",
    "McEstimate",
    "MissingAssignment",
    "NoFeasiblePoint",
    "NotConverged",
    "OddDegree",
    "ParametricPolynomial",
    "PolyParseError",
    "SafetyProblem",
    "SemialgebraicSet",
    "SimulationConfig",
    "SolverConfig",
    "SosProgram",
    "StochasticSystem",
    "SynthesisConfig",
    "SynthesisResult",
    "build_barrier_program",
    "build_controller_program",
    "compute_barrier",
    "compute_u",
    "estimate_failure_probability",
    "generator",
    "generator_check",
    "min_linear_gain",
    "monomial_basis",
    "parse_polynomial",
    "probability_bound",
    "sampled_soundness",
    "simulate_path",
    "synthesize",
    "validate_problem",
    "wilson_interval",
]
