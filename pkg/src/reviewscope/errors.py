"""Exception types shared across the pipeline stages."""


class ReviewScopeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(ReviewScopeError):
    """Invalid configuration (bad paths, out-of-range values, unknown ids)."""


class CorpusError(ReviewScopeError):
    """Corpus file cannot be loaded or violates a hard invariant."""


class DocumentUnusableError(ReviewScopeError):
    """Parsed document lacks the fields needed to build a prompt (no title)."""


class TransportError(ReviewScopeError):
    """Network-level failure talking to an external service (retryable)."""


class ProviderError(ReviewScopeError):
    """The remote service answered with an error."""

    def __init__(self, message, status=None, body=None, retryable=False):
        super().__init__(message)
        self.status = status
        self.body = body
        self.retryable = retryable


class ReplayMissError(ReviewScopeError):
    """Replay mode was asked for a transcript that was never recorded."""

    def __init__(self, key):
        super().__init__(f"no recorded transcript for key {key}")
        self.key = key


class ParseFailure(ReviewScopeError):
    """A model response could not be parsed into the expected structure.

    The raw response is kept on the exception so no completion is lost.
    """

    def __init__(self, message, raw_text=""):
        super().__init__(message)
        self.raw_text = raw_text
