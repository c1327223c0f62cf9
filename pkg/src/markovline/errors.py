"""Exception types shared across the package."""


class MarkovLineError(Exception):
    """Base class for all package errors."""


class ConstructionError(MarkovLineError, ValueError):
    """A map, kernel or state vector violates a construction precondition."""


class DefinitionError(MarkovLineError, ValueError):
    """A definition or experiment file is malformed (unknown keys, bad values)."""


class BudgetError(MarkovLineError, RuntimeError):
    """A requested computation exceeds the documented evaluation budget."""
