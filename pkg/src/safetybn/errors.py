"""Exception and warning types shared across the engine."""

from __future__ import annotations


class SafetyBnError(Exception):
    """Base class for all engine errors."""


# --- model structure ---------------------------------------------------


class CycleError(SafetyBnError):
    """The graph contains a directed cycle."""

    def __init__(self, cycle: list[str]):
        self.cycle = list(cycle)
        super().__init__(f"graph contains a cycle: {' -> '.join(self.cycle)}")


class UnknownParent(SafetyBnError):
    """A node lists a parent id that does not exist."""


class UnknownNode(SafetyBnError):
    """A referenced node id does not exist in the model."""


class ArityError(SafetyBnError):
    """An expression has the wrong number of arguments or references an
    undeclared parent."""


class UnboundedSupport(SafetyBnError):
    """A continuous node has no derivable finite support."""


class PartitionError(SafetyBnError):
    """A partitioned CPD does not cover each partition-parent state exactly
    once."""


class ValueOutOfDomain(SafetyBnError):
    """An observation or intervention value lies outside the node domain."""


# --- expression language -----------------------------------------------


class ExpressionSyntaxError(SafetyBnError):
    """Expression text failed to parse; carries the offending position."""

    def __init__(self, message: str, position: int):
        self.position = position
        super().__init__(f"{message} (at position {position})")


class UnknownFunction(SafetyBnError):
    """A call names a function outside the fixed grammar."""


class DivideByZero(SafetyBnError):
    """Deterministic evaluation hit a zero denominator."""


class MissingParentValue(SafetyBnError):
    """Evaluation assignment does not cover every parent reference."""


class ParameterDomainError(SafetyBnError):
    """A distribution parameter is out of domain after substitution."""


class DegenerateTruncation(SafetyBnError):
    """A truncated normal retains essentially no mass inside its bounds."""


# --- inference ---------------------------------------------------------


class ZeroProbabilityEvidence(SafetyBnError):
    """The entered evidence set has probability (density) below the engine
    floor of 1e-300 under the model."""


class DegenerateWeights(SafetyBnError):
    """Likelihood weighting collapsed: effective sample size < 100."""


# --- idioms ------------------------------------------------------------


class BadParameter(SafetyBnError):
    """An idiom template received an out-of-range parameter."""


class PortKindMismatch(SafetyBnError):
    """A binding connects ports with incompatible node kinds or domains."""


class DuplicateBinding(SafetyBnError):
    """Two bindings target the same port, or a fragment is bound to itself
    on the same node."""


# --- file formats ------------------------------------------------------


class ModelParseError(SafetyBnError):
    """A model or evidence document failed to parse."""


class VersionError(SafetyBnError):
    """The document declares an unrecognized format version."""


class StrictKeyError(SafetyBnError):
    """Strict loading rejected an unknown top-level key."""


# --- warning categories ------------------------------------------------


class EngineWarning(UserWarning):
    """Base class for non-fatal engine diagnostics."""


class UnboundedIntegerWarning(EngineWarning):
    """An integer node spans a very wide range and is not observed; inference
    proceeds on a capped binned grid."""


class NonIntegerBinomialWarning(EngineWarning):
    """A Binomial trial count resolved to a non-integer and was floored."""


class BudgetExceededWarning(EngineWarning):
    """Refinement hit the per-node interval cap before converging."""
