"""Exception types shared across the toolkit."""


class EvadeError(Exception):
    """Base class for all toolkit errors."""


class DataError(EvadeError):
    """Corrupt or unreadable dataset/model file."""


class EmptyCorpus(EvadeError):
    """No usable documents after tokenization/filtering."""


class EmptyText(EvadeError):
    """An operation received text with no usable content."""


class EmptyQuery(EvadeError):
    """Query-dependent rule received an empty query."""


class EmptyBatch(EvadeError):
    """Batch-level rule received an empty batch."""


class NoWords(EvadeError):
    """Text contains no dictionary-checkable words."""


class MissingClass(EvadeError):
    """A labeled dataset is missing one of the required classes."""


class ZeroTemperature(EvadeError):
    """Temperature must be strictly positive."""


class TooShort(EvadeError):
    """Input text is too short for perturbation-based detection."""


class InsufficientMaskable(EvadeError):
    """Not enough maskable token positions to build a mask plan."""


class NoSurvivors(EvadeError):
    """Every paraphrase candidate was rejected by the filters."""


class ScorerError(EvadeError):
    """Base class for scorer failures."""


class ProtocolError(ScorerError):
    """Remote scorer response violated the wire protocol."""


class ScorerTimeout(ScorerError):
    """Remote scorer did not answer within the configured timeout."""


class HttpStatusError(ScorerError):
    """Remote scorer answered with a non-success HTTP status."""

    def __init__(self, status: int, message: str = ""):
        self.status = status
        super().__init__(message or f"remote scorer returned HTTP {status}")


class ConfigError(EvadeError):
    """Malformed or unknown configuration input."""
