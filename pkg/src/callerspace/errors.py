"""Exception hierarchy shared across the package.

``ConfigError`` maps to CLI exit code 1, every other ``CallerspaceError``
to exit code 2, and anything else to exit code 3.
"""


class CallerspaceError(Exception):
    """Base class for all package-level errors."""


class ConfigError(CallerspaceError):
    """Invalid CLI usage, flag combination, or experiment config."""


class StoreError(CallerspaceError):
    """Base class for embedding-store format errors."""


class BadMagic(StoreError):
    pass


class UnsupportedVersion(StoreError):
    pass


class TruncatedFile(StoreError):
    pass


class NonFiniteValue(StoreError):
    pass


class DimensionOrEmpty(StoreError):
    """Record frames empty or not matching the store's embed_dim."""


class InvalidStore(StoreError):
    """Store-level invariant violation (ordering, ids, empty store)."""


class InsufficientData(CallerspaceError):
    """A caller has too few segments to be split."""


class InsufficientUnits(CallerspaceError):
    """A caller has too few units for the requested group count."""

    def __init__(self, caller_id: int, message: str):
        super().__init__(message)
        self.caller_id = caller_id


class TooFewSamples(CallerspaceError):
    """Fewer than two units; no variance can be estimated."""


class DimensionMismatch(CallerspaceError):
    pass


class SingleClass(CallerspaceError):
    """Training data contains fewer than two classes."""


class KernelNumericalError(CallerspaceError):
    """Kernel evaluation produced non-finite values."""


class DegenerateBoost(CallerspaceError):
    """First boosting round cannot beat chance."""


class OneClassOnly(CallerspaceError):
    """ROC requested but only one class is present."""


class TooFewGroups(CallerspaceError):
    """A caller has fewer groups than the requested fold count."""

    def __init__(self, caller_id: int, message: str):
        super().__init__(message)
        self.caller_id = caller_id
