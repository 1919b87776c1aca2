"""
Error types for the crossed bootstrap toolkit
Every error carries the CLI exit code for its class
"""
from typing import Optional

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_VERIFICATION_FAILED = 4
EXIT_COMPUTATION = 5


class PigeonholeError(Exception):
    """Base class for toolkit errors"""

    exit_code = EXIT_COMPUTATION


class DataFormatError(PigeonholeError):
    """Input text could not be turned into a valid dataset"""

    exit_code = EXIT_INPUT

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DuplicateCellError(DataFormatError):
    """A (row, col) cell appears more than once"""

    def __init__(self, row_key: str, col_key: str, line: int, policy: str):
        self.row_key = row_key
        self.col_key = col_key
        self.policy = policy
        super().__init__(
            f"duplicate cell ({row_key!r}, {col_key!r}) rejected under duplicate policy '{policy}'",
            line=line,
        )


class ConfigError(PigeonholeError):
    """A key-value configuration file is invalid"""

    exit_code = EXIT_INPUT


class ShapeMismatchError(PigeonholeError):
    """Variance components do not match the incidence pattern"""


class EmptyGroupError(PigeonholeError):
    """A requested label has no observations"""

    def __init__(self, label: str):
        self.label = label
        super().__init__(f"group '{label}' has no observations")


class UndefinedStatisticError(PigeonholeError):
    """The statistic cannot be evaluated on the original data"""


class EnumerationCapError(PigeonholeError):
    """Exhaustive enumeration would exceed the configured cap"""


class InfeasibleSpecError(PigeonholeError):
    """A generator specification cannot be realized"""


class AllRecordsRemovedError(PigeonholeError):
    """A mask removed every record"""
