"""Exception hierarchy shared across the package.

Everything derives from QuanvsegError so callers (notably the CLI) can
distinguish package failures from genuine bugs.  Most subclasses also
derive from ValueError to stay idiomatic for library users.
"""


class QuanvsegError(Exception):
    """Base class for all package errors."""


class SizeError(QuanvsegError, ValueError):
    """A size or count is outside its permitted range."""


class ShapeError(QuanvsegError, ValueError):
    """Array shapes are inconsistent with the operation's contract."""


class ConfigError(QuanvsegError, ValueError):
    """A configuration value or key is invalid."""


class EncodingRangeError(QuanvsegError, ValueError):
    """Input values fall outside the [0, 1] angle-encoding domain."""


class QubitIndexError(QuanvsegError, IndexError):
    """A gate references a qubit outside the register."""


class CircuitParseError(QuanvsegError, ValueError):
    """Malformed circuit text; carries the offending line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FileFormatError(QuanvsegError, ValueError):
    """Malformed binary file; carries the byte offset of the defect."""

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"offset {offset}: {message}"
        super().__init__(message)


class TruncatedFileError(FileFormatError):
    """File payload is shorter than its header promises."""


class DataError(QuanvsegError, ValueError):
    """A dataset or split does not satisfy the operation's preconditions."""


class StateError(QuanvsegError, ValueError):
    """A backward pass received a cache that does not match its forward."""


class NumericError(QuanvsegError, ArithmeticError):
    """Non-finite values were produced or supplied."""
