"""Exception hierarchy.

Everything raised for bad input data derives from :class:`DataError`, which the
CLI maps to exit code 2. Programming mistakes (wrong types, bad arguments) are
left as the usual built-in exceptions.
"""


class DataError(Exception):
    """Base class for data, validation and contract errors."""


# temporal graph store
class SealedPeriod(DataError):
    pass


class PeriodMismatch(DataError):
    pass


class InvalidRecord(DataError, ValueError):
    pass


class UnknownPeriod(DataError, KeyError):
    def __str__(self):  # KeyError quotes its argument otherwise
        return Exception.__str__(self)


class PeriodNotResident(DataError):
    pass


class NotPersisted(DataError):
    pass


class NotSealed(DataError):
    pass


class ResidencyExceeded(DataError):
    """More subgraphs resident than the active cap allows."""


# ingest
class ParseError(DataError, ValueError):
    pass


class ValidationError(DataError, ValueError):
    pass


class UnknownCurrency(ValidationError):
    pass


class UnorderedInput(DataError):
    """An event belongs to a period the ingest has already sealed."""


# engine
class NegativeAmount(DataError, ValueError):
    pass


class NegativeInput(DataError, ValueError):
    pass


class StateGap(DataError):
    pass


class MissingEvidence(DataError):
    pass


# persistence
class CorruptFile(DataError):
    pass


class MissingState(DataError):
    pass


# simulation / evaluation
class InvalidConfig(DataError, ValueError):
    pass


class UnlabeledAccount(DataError):
    pass


class MissingPeriods(DataError):
    pass
