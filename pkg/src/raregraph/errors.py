"""Exception types shared across the package."""


class RaregraphError(Exception):
    """Base class for all raregraph errors."""


class ParameterError(RaregraphError, ValueError):
    """A distribution parameter violates its invariants (e.g. non-PD covariance)."""


class DomainError(RaregraphError, ValueError):
    """An observation lies outside the support of its distribution family."""


class FitError(RaregraphError, ValueError):
    """Maximum-likelihood fitting received unusable data (empty or too few samples)."""


class ParseError(RaregraphError, ValueError):
    """A data file could not be parsed; the message names the file and location."""


class IntegrityError(RaregraphError, ValueError):
    """Cross-record consistency is broken (dangling edges, degree mismatches, ...)."""


class SchemaMismatchError(RaregraphError, ValueError):
    """Fitted parameters and cohort were built against different feature schemas."""
