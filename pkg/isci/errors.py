class ISCIError(Exception):
    """Base class for all library errors."""


class GraphError(ISCIError):
    """Malformed graph or illegal rejection step."""


class ModelError(ISCIError):
    """Invalid marginal model input (non-finite values, p-value out of range)."""


class SolverError(ISCIError):
    """Numeric failure while solving for confidence bounds."""


class ScenarioError(ISCIError):
    """Invalid simulation scenario (e.g. correlation matrix not positive definite)."""
