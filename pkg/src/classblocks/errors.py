"""Exception types shared across the package.

Plain ``ValueError`` is raised for bad call arguments (invalid scopes,
empty groups, dimension mismatches); the classes below mark problems with
external data or numerical routines.
"""


class FormatError(ValueError):
    """An input file violates its documented format."""


class TruncationError(FormatError):
    """A binary payload is shorter or longer than its header implies."""


class DataError(ValueError):
    """Well-formed input carrying unacceptable values (NaN/inf responses)."""


class ConsistencyError(ValueError):
    """Components of a dataset disagree (class counts, sample universes)."""


class SolverError(RuntimeError):
    """An iterative numerical routine failed to converge."""
