"""Exception taxonomy shared across the engine.

Exit-code mapping used by the CLI: config errors -> 2, backend errors -> 3,
data errors -> 4.
"""

from __future__ import annotations


class RockError(Exception):
    """Base class for all engine errors."""

    exit_code = 1

    @property
    def error_class(self) -> str:
        return type(self).__name__


class ConfigError(RockError):
    """Invalid configuration supplied by the operator."""

    exit_code = 2


class LatticeError(ConfigError):
    """A normalization-flag combination violates an exclusion rule."""


class BackendError(RockError):
    """Failure talking to, or interpreting, a model backend."""

    exit_code = 3


class BackendUnavailable(BackendError):
    """Transport failure that persisted through the retry budget."""

    def __init__(self, endpoint: str, attempts: int, detail: str = ""):
        self.endpoint = endpoint
        self.attempts = attempts
        msg = f"backend unreachable at {endpoint} after {attempts} attempts"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class BackendRejected(BackendError):
    """The backend answered with a non-retryable (4xx) status."""

    def __init__(self, endpoint: str, status_code: int, body: str = ""):
        self.endpoint = endpoint
        self.status_code = status_code
        super().__init__(f"backend rejected request to {endpoint} with status {status_code}: {body[:200]}")


class MalformedResponse(BackendError):
    """A 2xx response whose body does not match the wire schema."""


class MissingScore(BackendError):
    """A precedence lookup hit a pair absent from the score table.

    Signals an incomplete backend fetch rather than a math error.
    """

    def __init__(self, pair: tuple[str, str]):
        self.pair = pair
        super().__init__(f"no raw directional scores for pair {pair!r}")


class DataError(RockError):
    """Problem with an input dataset, world file, or suite file."""

    exit_code = 4


class ParseError(DataError):
    """Structurally invalid dataset file; message carries element/line context."""


class UnknownAttribute(ParseError):
    """A dataset attribute holds a value outside its documented domain."""


class WrongColumnCount(ParseError):
    def __init__(self, line_number: int, expected: int, got: int):
        self.line_number = line_number
        super().__init__(f"line {line_number}: expected {expected} columns, got {got}")


class EmptyCovariates(DataError):
    """Matching was requested against an empty covariate set."""


class EmptyAfterFilter(DataError):
    """The temporality pre-filter removed every covariate; caller decides fallback."""


class SuiteConstructionFailed(DataError):
    """The certified-suite generator exhausted its retry budget."""
