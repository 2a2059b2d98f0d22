"""Exception hierarchy shared across the toolkit.

DataError covers anything wrong with input files or records; EndpointError
covers remote model endpoints (transport failures and malformed payloads).
The CLI maps these onto distinct exit codes.
"""


class AnsumError(Exception):
    pass


class DataError(AnsumError):
    """Bad input data: parse failures, invariant violations, coverage gaps."""


class CorpusValidationError(DataError):
    def __init__(self, message: str, example_id: str | None = None, field: str | None = None):
        super().__init__(message)
        self.example_id = example_id
        self.field = field


class EndpointError(AnsumError):
    """Remote endpoint problems."""


class TransportError(EndpointError):
    """Endpoint unreachable after the configured retry budget."""

    def __init__(self, message: str, attempts: int = 0):
        super().__init__(message)
        self.attempts = attempts


class MalformedResponseError(EndpointError):
    """Endpoint answered, but the payload does not match the wire contract."""

    def __init__(self, message: str, raw: object = None):
        super().__init__(message)
        self.raw = raw
