"""Exception hierarchy shared by the library and the CLI."""


class AutocalError(Exception):
    """Base class for all library errors."""


class ValidationError(AutocalError, ValueError):
    """Input data or model parameters violate a documented invariant."""


class DomainError(ValidationError):
    """A numerical argument lies outside the function's domain."""


class ParseError(ValidationError):
    """Malformed CSV or JSON input."""

    def __init__(self, message, *, row=None, line=None, column=None):
        super().__init__(message)
        self.row = row
        self.line = line
        self.column = column


class UnknownLevel(ValidationError):
    """A prediction does not match any level of the partition bit-exactly."""

    def __init__(self, message, *, row=None, value=None):
        super().__init__(message)
        self.row = row
        self.value = value


class LevelUnderpopulated(ValidationError):
    """A level has too few observations to estimate its variance."""

    def __init__(self, message, *, level=None, count=None):
        super().__init__(message)
        self.level = level
        self.count = count


class EmptyLevel(ValidationError):
    """A partition level has no observations in the sample."""

    def __init__(self, message, *, level=None):
        super().__init__(message)
        self.level = level


class NumericalError(AutocalError, ArithmeticError):
    """A null distribution or statistic cannot be evaluated."""


class DegenerateLevel(NumericalError):
    """Some level has p_k * tau_k^2 == 0, so normalization is undefined."""

    def __init__(self, message, *, level=None):
        super().__init__(message)
        self.level = level


class DegenerateModel(NumericalError):
    """Every level has zero variance; the Gaussian limit collapses to a point."""


class ZeroMean(NumericalError):
    """The response mean is nonpositive or the prediction mean is zero.

    ``partial`` carries the curve statistics that remain well defined
    (prefix and suffix sums) with ``u`` and ``abc_unscaled`` set to ``None``.
    """

    def __init__(self, message, *, partial=None):
        super().__init__(message)
        self.partial = partial
