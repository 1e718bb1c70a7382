"""Exception hierarchy. The CLI maps each family to its own exit code."""


class RffTrackError(Exception):
    pass


class InvalidArgumentError(RffTrackError, ValueError):
    """Bad shapes, non-positive sizes, out-of-range indices."""


class ConfigError(RffTrackError):
    pass


class DataError(RffTrackError):
    """Input files or point sets that cannot be used."""


class InsufficientDataError(DataError):
    pass


class NumericError(RffTrackError, ArithmeticError):
    """A non-finite objective or other numerical breakdown."""
