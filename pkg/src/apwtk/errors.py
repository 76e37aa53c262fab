"""Exception hierarchy; the CLI maps each class to an exit code."""


class ApwtkError(Exception):
    pass


class InvalidArgument(ApwtkError, ValueError):
    """Bad parameter or malformed input (exit code 2)."""


class PreconditionError(InvalidArgument):
    """Input data violates an operation's stated precondition."""


class CertificateError(ApwtkError):
    """A construction produced output that fails its own certificate (exit code 3)."""


class ConstructionError(ApwtkError):
    """A finite search ran out of candidates (exit code 4)."""

    def __init__(self, message, level=None):
        super().__init__(message)
        self.level = level
