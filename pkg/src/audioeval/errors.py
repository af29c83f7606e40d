"""Exception hierarchy shared across the harness."""


class AudioEvalError(Exception):
    pass


# -- configuration -----------------------------------------------------------


class ConfigError(AudioEvalError):
    """Base for configuration problems; ``path`` names the offending key."""

    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class ConfigSyntaxError(ConfigError):
    pass


class SchemaError(ConfigError):
    pass


class InvariantError(ConfigError):
    pass


# -- dataset -----------------------------------------------------------------


class ManifestError(AudioEvalError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class DuplicateIdError(ManifestError):
    pass


class TemplateError(AudioEvalError):
    pass


# -- scheduler ---------------------------------------------------------------


class PoolClosed(AudioEvalError):
    pass


class Exhausted(AudioEvalError):
    """All attempts of a retried action failed."""

    def __init__(self, last_error: BaseException, attempts: int):
        self.last_error = last_error
        self.attempts = attempts
        super().__init__(f"gave up after {attempts} attempt(s): {last_error!r}")


# -- client ------------------------------------------------------------------


class FormatError(AudioEvalError):
    pass


class TransportError(AudioEvalError):
    """A request did not produce a usable response."""

    retryable = True


class RequestTimeout(TransportError, TimeoutError):
    pass


class EndpointConnectionError(TransportError, ConnectionError):
    pass


class HttpStatusError(TransportError):
    def __init__(self, code: int, body: str = ""):
        self.code = code
        self.retryable = is_retryable_status(code)
        self.body = body
        super().__init__(f"HTTP {code}" + (f": {body[:200]}" if body else ""))


class DecodeError(TransportError):
    retryable = False


def is_retryable_status(code: int) -> bool:
    """5xx and 429 are retryable; every other non-2xx status is not."""
    return code == 429 or 500 <= code <= 599


def is_retryable(exc: BaseException) -> bool:
    if isinstance(exc, TransportError):
        return exc.retryable
    return isinstance(exc, (TimeoutError, ConnectionError))


# -- metrics -----------------------------------------------------------------


class MetricError(AudioEvalError):
    pass


class EmptyReference(MetricError):
    pass


class NoAlignedPairs(MetricError):
    pass


class JudgeParseError(MetricError):
    pass


class ZeroAudio(MetricError):
    pass


class ZeroWallClock(MetricError):
    pass


class EmptyList(MetricError):
    pass
