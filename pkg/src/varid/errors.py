"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes, so keep the split between
"the file itself is malformed" (InputFormatError) and "the file parsed
fine but the data violates a contract" (DataError).
"""


class VaridError(Exception):
    """Base class for all errors raised by this package."""


class InputFormatError(VaridError):
    """Malformed input: bad JSON/TSV lines, unknown enum strings, bad schema."""


class DataError(VaridError):
    """Well-formed input that violates an operation's contract."""


class ProtocolError(VaridError):
    """Violation of the two-step cross-domain training protocol."""


class ModelFormatError(VaridError):
    """Model artifact with an unsupported format version."""


class ModelIntegrityError(VaridError):
    """Model artifact that is truncated or fails its content hash."""
