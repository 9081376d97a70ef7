"""Exception types shared across the package."""


class AgcKanError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(AgcKanError, ValueError):
    """An argument violated a documented precondition."""


class SimulationDivergedError(AgcKanError):
    """State became non-finite during integration."""

    def __init__(self, step_index, message=None):
        self.step_index = step_index
        super().__init__(message or f"simulation diverged at internal step {step_index}")


class DatasetFormatError(AgcKanError):
    """Dataset file has a wrong magic or version."""


class DatasetCorruptionError(AgcKanError):
    """Dataset file is truncated or internally inconsistent."""


class DegenerateNetworkError(AgcKanError):
    """Pruning removed every input-to-output path."""


class ExpressionEvaluationError(AgcKanError):
    """A symbolic expression produced a non-finite intermediate."""

    def __init__(self, node_id, message=None):
        self.node_id = node_id
        super().__init__(message or f"non-finite value at expression node {node_id}")


class SchemaError(AgcKanError):
    """Incompatible model or feature schema version."""
