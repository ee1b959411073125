"""Exception hierarchy shared by all xlign modules.

The CLI maps these onto exit codes: ``DataError`` -> 2, ``NumericalError`` -> 3.
"""


class XlignError(Exception):
    """Base class for every error raised deliberately by xlign."""


class DataError(XlignError, ValueError):
    """Malformed or inconsistent input data (files, dictionaries, indices)."""


class NumericalError(XlignError, ArithmeticError):
    """A numerical routine hit a degenerate or non-finite state."""


class ZeroColumnError(NumericalError):
    """A word vector has zero length where a length projection is required."""

    def __init__(self, index, round_index=None, word=None):
        self.index = index
        self.round_index = round_index
        self.word = word
        where = f"word index {index}"
        if word is not None:
            where += f" ({word!r})"
        if round_index is not None:
            where += f" at round {round_index}"
        super().__init__(f"zero-length column: {where}")
