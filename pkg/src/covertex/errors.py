"""Exception hierarchy shared across the toolkit."""


class CovertexError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(CovertexError):
    """Invalid parameter combination (bits per symbol, class count, policy...)."""


class FramingError(CovertexError):
    """Malformed frame, stream, or serialized artifact."""


class BackendError(CovertexError):
    """A channel backend failed or violated the wire protocol."""
