from collections import defaultdict


class CopolymerException(Exception):
    pass


class NotRegistered(CopolymerException):
    pass


class DomainError(CopolymerException, ValueError):
    pass


class BudgetExceeded(CopolymerException):
    pass


class DisorderTooShort(CopolymerException):
    pass


class EmptyPathSet(CopolymerException):
    """Raised when no lattice path crosses a column of the requested type
    in the requested number of steps (u below t_Θ, or a geometry that the
    x-tag forbids).
    """


class TableMissing(CopolymerException):
    pass


class TableSaturation(CopolymerException):
    pass


class NonPositive(CopolymerException):
    pass


class NoConvergence(CopolymerException):
    pass


class ConstraintViolation(CopolymerException):
    pass


class MenuMismatch(CopolymerException):
    pass


class EmptySaturatedFamily(CopolymerException):
    """Raised when a strategy family has no member with zero B-mass.

    This is a report about the sampled micro-emulsion, not a crash: the
    phase scan records it and falls back to the minimal-B subfamily.
    """


class NoCrossing(CopolymerException):
    def __init__(self, message="", bracket=None):
        super().__init__(message)
        self.bracket = bracket


class StatisticallyUndecided(CopolymerException):
    def __init__(self, message="", interval=None):
        super().__init__(message)
        self.interval = interval


class MalformedWindow(CopolymerException, ValueError):
    pass


class ValidationError(AssertionError):
    """A configuration, parameter set or stored table failed its checks.

    ``errors`` maps each offending key to its own ValidationError (or to a
    plain message); it is empty when the error concerns one field only, in
    which case ``field_name`` names it. The string form appends a summary
    of the per-key messages.
    """

    def __init__(self, message="", errors=None, field_name=None):
        super().__init__(message)
        self.errors = errors or {}
        self.field_name = field_name
        self._message = message

    @property
    def message(self):
        if not self.errors:
            return self._message
        return f"{self._message}({self._summary()})"

    def __str__(self):
        return str(self.message)

    def __repr__(self):
        return f"{type(self).__name__}({self._message!r}, keys={sorted(self.errors)})"

    def to_dict(self):
        """Nested ``{key: message}`` view of ``errors``."""
        return {key: _flatten(error) for key, error in self.errors.items()}

    def _summary(self):
        keys_by_message = defaultdict(list)
        for key, text in self.to_dict().items():
            keys_by_message[str(text)].append(key)
        return " ".join(f"{text}: {keys}" for text, keys in keys_by_message.items())


def _flatten(error):
    if isinstance(error, dict):
        return {key: _flatten(value) for key, value in error.items()}
    if isinstance(error, ValidationError) and error.errors:
        return error.to_dict()
    return str(error)


# CLI exit codes per failure class; 0 is reserved for success.
EXIT_CODES = {
    ValidationError: 2,
    DomainError: 3,
    BudgetExceeded: 4,
    DisorderTooShort: 5,
    EmptyPathSet: 6,
    TableMissing: 7,
    TableSaturation: 8,
    NonPositive: 9,
    NoConvergence: 10,
    ConstraintViolation: 11,
    MenuMismatch: 12,
    EmptySaturatedFamily: 13,
    NoCrossing: 14,
    StatisticallyUndecided: 15,
    MalformedWindow: 16,
    NotRegistered: 17,
}


def exit_code_for(exc):
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return 1
