"""Exception types raised across the package.

All of them derive from ``ValueError`` so callers that only care about
"bad input" can catch that. Index problems use the builtin ``IndexError``.
"""


class SizeError(ValueError):
    """A collection is empty or too small for the requested operation."""


class ShapeError(ValueError):
    """Two inputs have incompatible shapes, or a layout does not fit a model."""


class CapacityError(ValueError):
    """An instance is too large for exhaustive enumeration."""


class ValidationError(ValueError):
    """Input parsed correctly but violates a data invariant."""


class ParseError(ValueError):
    """A data file could not be parsed.

    ``line`` is the 1-based line number in the offending file, when known.
    """

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
