"""Exception hierarchy shared across the toolkit.

Exit-code mapping for the CLI: ArgumentError -> 1, DataError (incl.
ParseError) -> 2, BackendError (incl. Transport/Protocol/Server) -> 3.
"""


class ErrlensError(Exception):
    """Base class for all toolkit errors."""


class ArgumentError(ErrlensError):
    """A caller violated an operation precondition."""


class DataError(ErrlensError):
    """Input data is structurally valid but semantically unusable."""


class ParseError(DataError):
    """A file failed to parse; carries location context."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc = f" ({loc})"
        super().__init__(f"{message}{loc}")
        self.path = path
        self.line = line


class UndefinedCorrelationError(DataError):
    """Correlation is undefined for the given input (e.g. constant vector)."""


class BackendError(ErrlensError):
    """Base class for scorer-backend failures."""


class TransportError(BackendError):
    """The backend could not be reached (timeout, connection failure)."""


class ProtocolError(BackendError):
    """The backend answered, but the payload violates the wire schema."""


class ServerError(BackendError):
    """The backend answered with a non-2xx status."""

    def __init__(self, message, status=None, body=None):
        super().__init__(message)
        self.status = status
        self.body = body
