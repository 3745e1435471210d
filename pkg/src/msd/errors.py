"""Exception hierarchy shared across the package."""


class MsdError(Exception):
    """Base class for all package-specific errors."""


class DataError(MsdError):
    """Bad input data: unreadable, unresolvable, or infeasible."""


class InstanceParseError(DataError):
    """Instance file is not parseable as the expected JSON document."""


class SchemaVersionError(DataError):
    """Instance file declares a schema version this build does not read."""


class UnknownReferenceError(DataError):
    """Instance file references an id that is not defined in it."""


class InfeasibleParamsError(DataError):
    """Synthetic-generator parameters admit no feasible instance."""


class SolverLimitError(MsdError):
    """A search limit stopped a stage before any usable solution existed."""
