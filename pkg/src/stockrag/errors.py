"""Exception types shared across the package."""
from __future__ import annotations


class StockragError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(StockragError):
    """Experiment configuration is invalid or references missing files."""


class IngestError(StockragError):
    """A data file could not be read or its envelope is malformed."""


class DegenerateEmbeddingError(StockragError):
    """Text produced no usable features, or a zero vector was supplied."""


class DimensionMismatchError(StockragError):
    """Vectors of different dimensions (different providers) were mixed."""


class MissingPriceError(StockragError):
    """No price bar exists within tolerance at or after the requested date."""


class UnbuildablePromptError(StockragError):
    """A prompt could not be assembled for this company and date."""


class ExemplarPoolError(StockragError):
    """The exemplar pool cannot satisfy the requested shot configuration."""

    def __init__(self, missing_class: str, needed: int, available: int):
        self.missing_class = missing_class
        self.needed = needed
        self.available = available
        super().__init__(
            f"exemplar pool has {available} {missing_class} candidates, "
            f"need {needed}"
        )


class BudgetExceededError(StockragError):
    """An assembled prompt does not fit the configured context window."""

    def __init__(self, estimate: int, limit: int):
        self.estimate = estimate
        self.limit = limit
        super().__init__(
            f"token estimate {estimate} exceeds context limit {limit}"
        )


class TransportError(StockragError):
    """A model or embedding endpoint failed after exhausting retries."""


class UndefinedMetricError(StockragError):
    """A metric was requested over an empty record set."""


class PipelineError(StockragError):
    """Fatal pipeline-stage failure carrying a process exit code."""

    def __init__(self, exit_code: int, message: str):
        self.exit_code = exit_code
        super().__init__(message)
