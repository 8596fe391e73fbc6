"""Exception hierarchy.

Every exception raised by this package derives from
:class:`CausalSynthError`, so callers can catch one base class at the
boundary.  Validation problems that should be *reported* rather than
raised (model linting, verification mismatches) are returned as data
objects by the relevant functions instead of living here.
"""


class CausalSynthError(Exception):
    """Base class for all package errors."""


# --------------------------------------------------------------------------
# graphs


class GraphError(CausalSynthError):
    """Structural problem with a directed graph."""


class CycleError(GraphError):
    """Directed cycle found where a DAG is required.

    Attributes
    ----------
    cycle : tuple of str
        Nodes forming one directed cycle, in traversal order.
    """

    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__(f"graph contains a directed cycle: {' -> '.join(self.cycle)}")


class UnknownNodeError(GraphError):
    """A referenced node is not declared in the graph."""


class OverlapError(GraphError):
    """Query endpoints overlap each other or the conditioning set."""


class NodeSetMismatchError(GraphError):
    """Two graphs were compared that do not share a node set."""


# --------------------------------------------------------------------------
# models


class ModelError(CausalSynthError):
    """Problem with a structural causal model or its use."""


class InvalidModelError(ModelError):
    """Operation attempted on a model that fails validation.

    Attributes
    ----------
    violations : tuple
        The validation findings that make the model unusable.
    """

    def __init__(self, violations):
        self.violations = tuple(violations)
        lines = "; ".join(str(v) for v in self.violations)
        super().__init__(f"model is invalid: {lines}")


class UnknownVariableError(ModelError):
    """A referenced variable name is not part of the model."""


class UnknownStateError(ModelError):
    """A state label is not declared for the variable in question."""


class MissingParentStateError(ModelError):
    """A mechanism was evaluated without states for all parents."""


class NoiseOutOfRangeError(ModelError):
    """A noise value fell outside the half-open unit interval."""


class IncompleteNoiseError(ModelError):
    """A replay was attempted without noise for every variable."""


# --------------------------------------------------------------------------
# language channel


class ChannelError(CausalSynthError):
    """Problem constructing prompts or realizing documents."""


class SchemaMismatchError(ChannelError):
    """Skeleton variables do not match the model schema."""


class EmptyMismatchListError(ChannelError):
    """Feedback was requested for an empty mismatch list."""


class PriorMissingVariableError(ChannelError):
    """The simulated channel has no prior for a constrained variable."""


class RealizationError(ChannelError):
    """A realization attempt failed at the transport level.

    Attributes
    ----------
    retryable : bool
        Whether retrying the same request can reasonably succeed.
    """

    retryable = False


class NetworkError(RealizationError):
    """Connection failure or timeout while talking to an endpoint."""

    retryable = True


class RateLimitedError(RealizationError):
    """The endpoint refused the request due to rate limiting."""

    retryable = True


class AuthError(RealizationError):
    """The endpoint rejected the configured credentials."""


class MalformedResponseError(RealizationError):
    """The endpoint answered with an unusable payload."""


# --------------------------------------------------------------------------
# pipeline and statistics


class PipelineError(CausalSynthError):
    """Problem while running the generation loop."""


class EmptyLogError(PipelineError):
    """An estimate was requested from an empty log."""


class StatsError(CausalSynthError):
    """Problem while computing a statistic."""


class StateSpaceTooLargeError(StatsError):
    """Exact enumeration was requested for too large a joint space."""


class EmptySampleError(StatsError):
    """A statistic was requested for an empty sample."""


# --------------------------------------------------------------------------
# serialization and configuration


class FormatError(CausalSynthError):
    """Problem reading or writing a file format."""


class BifSyntaxError(FormatError):
    """Tokenization or grammar failure in a network file.

    Attributes
    ----------
    line, col : int
        1-based position of the offending token.
    expected : str
        What the parser was looking for at that point.
    """

    def __init__(self, line, col, expected, found=None):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        detail = f"line {line}, column {col}: expected {expected}"
        if found is not None:
            detail += f", found {found!r}"
        super().__init__(detail)


class BifSemanticError(FormatError):
    """Well-formed network file with inconsistent content."""


class NativeFormatError(FormatError):
    """Invalid content in the native JSON model format.

    Attributes
    ----------
    path : str
        JSON-path-like location of the offending value.
    """

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class DatasetFormatError(FormatError):
    """Invalid content in a dataset or log file.

    Attributes
    ----------
    lineno : int or None
        1-based line number of the offending record, when known.
    """

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class ConfigError(CausalSynthError):
    """Invalid run configuration."""
