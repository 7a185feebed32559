"""Exception hierarchy.

The CLI maps these onto exit codes: ``DataError`` subclasses exit with 3,
``NumericalError`` with 4.
"""


class TrivolError(Exception):
    pass


class DataError(TrivolError, ValueError):
    """Bad input data: malformed files, mismatched stacks, invalid shapes."""


class FormatError(DataError):
    pass


class BadMagicError(FormatError):
    def __init__(self, path, expected: bytes, found: bytes):
        self.expected = expected
        self.found = found
        super().__init__(f"{path}: bad magic {found!r}, expected {expected!r}")


class TruncatedFileError(FormatError):
    def __init__(self, path, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(f"{path}: truncated file, expected {expected} bytes but found {actual}")


class DimsMismatchError(FormatError):
    def __init__(self, path, expected: int, actual: int):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f"{path}: header dims imply {expected} payload bytes but file carries {actual}"
        )


class RangeError(DataError):
    pass


class PoseOverlapError(DataError):
    pass


class ConfigError(DataError):
    pass


class FitFailureError(TrivolError):
    pass


class NumericalError(TrivolError, FloatingPointError):
    def __init__(self, message: str, epoch: int | None = None, slice_index: int | None = None):
        self.epoch = epoch
        self.slice_index = slice_index
        super().__init__(message)
