"""Exception types shared across the package."""


class FedHealthError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FedHealthError, ValueError):
    """Incompatible shapes, architectures or settings."""


class InvalidInputError(FedHealthError, ValueError):
    """Input data violates an operation's preconditions."""


class StateError(FedHealthError, RuntimeError):
    """An operation was called in the wrong order (e.g. backward before forward)."""


class LoadError(FedHealthError, FileNotFoundError):
    """A required dataset file is missing or unreadable."""


class IntegrityError(FedHealthError):
    """Dataset files disagree with each other (row counts, widths, label ranges)."""


class StratificationError(InvalidInputError):
    """A class has too few samples for a stratified split."""


class ProtocolError(FedHealthError):
    """A federation message is malformed, tampered with, or sent to the wrong party."""


class EncodingRangeError(FedHealthError, ValueError):
    """A value exceeds the fixed-point codec's magnitude bound."""


class SummandOverflowError(FedHealthError, OverflowError):
    """Adding more ciphertexts would exceed the codec's summand budget."""
