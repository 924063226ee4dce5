"""Exception taxonomy shared across the package.

Every failure mode the library reports maps to one of these classes so
callers (and the CLI exit-code map) can branch on kind rather than on
message text.
"""


class TvlmError(Exception):
    """Base class for all library errors."""


class ShapeError(TvlmError, ValueError):
    """Dimension mismatch; the message names the offending shapes."""


class DomainError(TvlmError, ValueError):
    """Input outside an operation's mathematical domain (empty series, ...)."""


class ConfigError(TvlmError, ValueError):
    """Invalid or inconsistent configuration value."""


class CapacityError(TvlmError, ValueError):
    """A fixed-capacity structure (positional table, ...) would overflow."""


class ContractError(TvlmError, RuntimeError):
    """An API contract was violated (e.g. backward from a non-scalar)."""


class NumericsError(TvlmError, ArithmeticError):
    """A kernel produced NaN/Inf; non-finite values are never silent."""


class DataError(TvlmError, ValueError):
    """Base class for dataset ingestion failures."""


class MissingFileError(DataError):
    pass


class EmptyDataError(DataError):
    pass


class RaggedRowError(DataError):
    """Row with the wrong number of cells; carries the 1-based row index."""

    def __init__(self, row: int, expected: int, got: int):
        super().__init__(f"row {row}: expected {expected} cells, got {got}")
        self.row = row


class NonNumericCellError(DataError):
    """Unparseable cell; carries 1-based row and column indices."""

    def __init__(self, row: int, col: int, text: str):
        super().__init__(f"row {row}, column {col}: not numeric: {text!r}")
        self.row = row
        self.col = col


class MetricError(TvlmError, ValueError):
    """Degenerate metric input (zero denominator, insample too short)."""


class TransportError(TvlmError, RuntimeError):
    """Remote encoder/bridge unreachable or non-200; names endpoint+status."""

    def __init__(self, endpoint: str, status=None, detail: str = ""):
        msg = f"endpoint {endpoint}: "
        msg += f"HTTP {status}" if status is not None else "unreachable"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
        self.endpoint = endpoint
        self.status = status


class MalformedResponseError(TvlmError, RuntimeError):
    """Remote payload did not match the wire protocol schema."""


class EmbeddingShapeError(TvlmError, RuntimeError):
    """Remote embedding shape differs from the descriptor's expectation."""

    def __init__(self, expected, actual):
        super().__init__(f"embedding shape mismatch: expected {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class CheckpointError(TvlmError, RuntimeError):
    """Unreadable checkpoint or config-fingerprint mismatch."""
