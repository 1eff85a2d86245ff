"""Exception hierarchy shared across the pipeline.

Exit-code mapping for the CLI: ValidationError and subclasses map to
exit 1, StoreError / TransportError to exit 2.
"""


class PaperAtlasError(Exception):
    """Base class for all package errors."""


class ValidationError(PaperAtlasError):
    """Input violates a documented contract (bad field, bad config, bad plan)."""


class RecordParseError(ValidationError):
    """Malformed record JSON; carries the byte offset of the failure."""

    def __init__(self, message: str, byte_offset: int | None = None):
        super().__init__(message)
        self.byte_offset = byte_offset


class StoreError(PaperAtlasError):
    """Store directory missing, unreadable, locked, or inconsistent on disk."""


class TransportError(PaperAtlasError):
    """All attempts to reach an external endpoint failed; carries the attempt log."""

    def __init__(self, message: str, attempts: list[str] | None = None):
        super().__init__(message)
        self.attempts = attempts or []


class ContractError(PaperAtlasError):
    """A gateway response violated its JSON contract; carries the raw text."""

    def __init__(self, message: str, raw_text: str = ""):
        super().__init__(message)
        self.raw_text = raw_text
