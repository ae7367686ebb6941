"""Exception types shared across the package."""


class HyperimpError(Exception):
    """Base class for all package-specific errors."""


class InvalidSpec(HyperimpError):
    """A hyperparameter or space definition violates its invariants."""


class OutOfDomain(HyperimpError):
    """A value lies outside the domain of its hyperparameter."""


class ParseError(HyperimpError):
    """A file could not be parsed; carries line/row context where known."""


class MissingColumn(ParseError):
    """A runs file header does not match the expected space columns."""


class EmptyCollection(HyperimpError):
    """No datasets survived loading or filtering."""


class TooFewSamples(HyperimpError):
    """Not enough records to fit a surrogate model."""


class ConstantTarget(HyperimpError):
    """All target values are equal; no model can be fit."""


class DegenerateTree(HyperimpError):
    """A tree has zero total variance; the caller decides how to proceed."""


class ConstantModel(HyperimpError):
    """Every tree in a forest has zero variance."""


class UnsupportedStatistic(HyperimpError):
    """Requested test parameters fall outside the tabulated range."""
