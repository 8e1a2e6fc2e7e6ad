"""Exception hierarchy shared by the library and the command line front end."""


class CatAnovaError(Exception):
    """Base class for all errors raised by catanova."""


class DataError(CatAnovaError, ValueError):
    """Malformed or inconsistent input data."""


class OutOfSupportError(CatAnovaError, KeyError):
    """A query row has zero probability under the empirical distribution."""

    def __str__(self):
        # KeyError quotes its argument; keep the plain message
        return str(self.args[0]) if self.args else ""


class NumericalError(CatAnovaError, ArithmeticError):
    """A linear system could not be solved to the requested accuracy."""


class ConsistencyError(CatAnovaError, RuntimeError):
    """An internal invariant that the theory guarantees was violated."""
