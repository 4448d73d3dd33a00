"""Exception hierarchy shared across the package."""

from __future__ import annotations


class PatscoutError(Exception):
    """Base class for all package errors."""


class ConfigurationError(PatscoutError):
    """Bad user input: missing roots, malformed flags, invalid specs."""


class IndexLookupError(PatscoutError, KeyError):
    """A function id was not found in the code index."""


class ContractViolationError(PatscoutError):
    """A caller violated an operation precondition."""


class SynthesisError(PatscoutError):
    """The LLM kept producing schema-invalid output.

    Carries the raw responses so the failure can be audited.
    """

    def __init__(self, message: str, raw_responses: list[str] | None = None):
        super().__init__(message)
        self.raw_responses = raw_responses or []


class GatewayError(PatscoutError):
    """Transport-level LLM failure after retries."""


class CassetteMissError(GatewayError):
    """Strict replay could not find the request digest in the cassette store."""

    def __init__(self, digest: str):
        super().__init__(f"cassette miss for request digest {digest}")
        self.digest = digest


class RenderError(PatscoutError):
    """An inlined detection context failed to re-parse as a single function."""
