"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ResourceBudgetError(RuntimeError):
    """A requested computation exceeds the configured memory/size budget."""

    def __init__(self, message, required=None, budget=None):
        super().__init__(message)
        self.required = required
        self.budget = budget


class UnsupportedOperationError(RuntimeError):
    """The operation is not defined for the given variant (e.g. no gradient)."""


class InvariantViolationError(AssertionError):
    """An internal consistency check failed; indicates an implementation bug."""


class ConfigError(ValueError):
    """An experiment configuration violates one or more constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid config: " + "; ".join(self.violations))
