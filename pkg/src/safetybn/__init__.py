"""Hybrid Bayesian-network engine and idiom library for product safety and
risk assessment.

Build models from reusable fragments, enter evidence, compute posterior
reliability / hazard / injury / risk distributions, and cross-check every
result against an independent Monte Carlo oracle.
"""

from .errors import (
    ArityError,
    BadParameter,
    CycleError,
    DegenerateTruncation,
    DegenerateWeights,
    DivideByZero,
    DuplicateBinding,
    ExpressionSyntaxError,
    MissingParentValue,
    ModelParseError,
    ParameterDomainError,
    PartitionError,
    PortKindMismatch,
    SafetyBnError,
    StrictKeyError,
    UnboundedSupport,
    UnknownFunction,
    UnknownNode,
    UnknownParent,
    ValueOutOfDomain,
    VersionError,
    ZeroProbabilityEvidence,
)
from .expressions import (
    evaluate_deterministic,
    interval_mass,
    parse_expression,
    pretty,
    sample_value,
    tnormal_moments,
)
from .graph import (
    CompiledModel,
    DiagnosticsReport,
    ExpressionCpd,
    ModelSpec,
    Node,
    NodeKind,
    PartitionedCpd,
    TableCpd,
    build_model,
    topological_order,
    validate_model,
)
from .inference import (
    DiscretizationConfig,
    InferenceResult,
    Posterior,
    do_intervention,
    infer,
    posterior_summary,
    probability_query,
)

__version__ = "0.1.0"
