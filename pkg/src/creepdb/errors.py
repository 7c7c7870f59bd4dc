"""Exception taxonomy shared across the pipeline."""


class CreepDbError(Exception):
    """Base class for all package errors."""


class PreconditionError(CreepDbError):
    """An operation was called with arguments violating its contract."""


# corpus
class DuplicateDoi(CreepDbError):
    pass


class MalformedManifest(CreepDbError):
    pass


class MissingAsset(CreepDbError):
    pass


# reasoning backend / skills
class BackendFailure(CreepDbError):
    pass


class SchemaViolation(CreepDbError):
    def __init__(self, violations, attempts=None):
        self.violations = list(violations)
        self.attempts = attempts
        detail = "; ".join(f"{path}: {msg}" for path, msg in self.violations)
        super().__init__(f"output violates schema: {detail}")


class ToolScopeViolation(CreepDbError):
    pass


# screening metrics
class MissingTruth(CreepDbError):
    pass


class UndefinedMetric(CreepDbError):
    pass


# formula
class ParseError(CreepDbError):
    def __init__(self, message, position):
        self.position = position
        super().__init__(f"{message} (at position {position})")


class UnknownUnit(CreepDbError):
    pass


class DimensionError(CreepDbError):
    """Base for dimensional-analysis failures."""


class DimensionMismatch(DimensionError):
    def __init__(self, message, subtree=None):
        self.subtree = subtree
        super().__init__(message if subtree is None else f"{message} in `{subtree}`")


class NonDimensionlessArgument(DimensionError):
    def __init__(self, message, subtree=None):
        self.subtree = subtree
        super().__init__(message if subtree is None else f"{message} in `{subtree}`")


class UnboundSymbol(CreepDbError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"symbol `{name}` has no binding")


# digitizer
class DegenerateAnchors(CreepDbError):
    pass


class NonPositiveLogAnchor(CreepDbError):
    pass


class SeriesNotFound(CreepDbError):
    pass


class AmbiguousTarget(CreepDbError):
    pass


class EmptyAfterCleaning(CreepDbError):
    pass


# numerics
class NumericalOverflow(CreepDbError):
    pass


class DegenerateObservations(CreepDbError):
    pass


class SingularJacobian(CreepDbError):
    pass


class NotConverged(CreepDbError):
    pass


# store
class UnknownDoi(CreepDbError):
    pass


class ConstraintViolation(CreepDbError):
    pass


class RecordNotFound(CreepDbError):
    pass


class ReviewConflict(CreepDbError):
    pass
