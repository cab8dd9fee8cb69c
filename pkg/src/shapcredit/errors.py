"""Exception hierarchy for shapcredit.

Grouped by subsystem so callers can catch at the right granularity:
network/inference errors, measure errors, model errors (including the
external-model protocol), game construction errors, solver errors, and
evaluation-harness errors.
"""


class ShapcreditError(Exception):
    """Base class for all shapcredit errors."""


# --- network / inference ---

class NetworkError(ShapcreditError):
    pass


class CycleDetected(NetworkError):
    pass


class InvalidCpt(NetworkError):
    pass


class UnknownVariable(NetworkError):
    pass


class UnboundVariable(NetworkError):
    pass


class ZeroProbabilityEvidence(NetworkError):
    pass


class TooLarge(NetworkError):
    """Exact enumeration would exceed the configured joint-state cap."""


# --- measures ---

class MeasureError(ShapcreditError):
    pass


class NonNumericSupport(MeasureError):
    pass


class EmptyInput(MeasureError):
    pass


# --- models / datasets / external protocol ---

class ModelError(ShapcreditError):
    pass


class MissingInput(ModelError):
    pass


class ContinuousInputUnsupported(ModelError):
    pass


class IncompatibleLossKind(ModelError):
    pass


class DatasetError(ShapcreditError):
    pass


class SchemaMismatch(DatasetError):
    pass


class ParseError(DatasetError):
    pass


class ProtocolError(ShapcreditError):
    """Malformed or mismatched traffic on the external-model channel."""


class ProtocolTimeout(ProtocolError):
    pass


class NonFiniteOutput(ProtocolError):
    pass


# --- games ---

class GameError(ShapcreditError):
    pass


class LossNodeMissing(GameError):
    pass


class ExpectedValueGlobalRejected(GameError):
    """Global games with the expected-value measure are identically zero."""


# --- solver ---

class SolverError(ShapcreditError):
    pass


class TooManyPlayers(SolverError):
    pass


class PlayerInCoalition(SolverError):
    pass


class SingularSystem(SolverError):
    """Sampled design does not determine the allocation; raise n_samples."""


# --- evaluation harness ---

class HarnessError(ShapcreditError):
    pass


class DegenerateResponse(HarnessError):
    """Response vector has zero variance; explained variance is undefined."""


class EmptyBackground(HarnessError):
    pass


# --- cli ---

class ConfigError(ShapcreditError):
    pass
