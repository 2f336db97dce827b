"""Shared exception types."""


class ContractViolation(ValueError):
    """An operation was called with arguments violating its contract."""


class InvalidItemError(ValueError):
    """Item id not present in the catalog."""


class UnknownUserError(ValueError):
    """User id not present in the loaded dataset."""


class DataError(ValueError):
    """Malformed or unusable input data."""
