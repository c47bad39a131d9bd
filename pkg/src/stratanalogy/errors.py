"""Exception hierarchy shared by the engine and the command line."""


class AnalogyError(Exception):
    """Base class; ``category`` is what the CLI reports."""

    category = "error"


class InvalidInputError(AnalogyError, ValueError):
    category = "invalid-input"


class ConditioningError(AnalogyError):
    """Conditioning on a type that has zero prior probability."""

    category = "conditioning"


class BudgetError(AnalogyError):
    category = "budget"

    def __init__(self, message, count=None):
        super().__init__(message)
        self.count = count


class GridError(InvalidInputError):
    """A grid is not closed under the map a witness needs."""

    category = "grid"


class RegularityError(InvalidInputError):
    category = "regularity"


class SchemaError(InvalidInputError):
    category = "schema"

    def __init__(self, message, path=""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path
