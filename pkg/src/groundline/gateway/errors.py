class GatewayError(RuntimeError):
    """Base class for failures talking to a model provider."""


class TransportError(GatewayError):
    """Network or HTTP failure that persisted through every retry."""


class ProviderError(GatewayError):
    """The provider answered, but the body did not match the expected schema."""


class CacheCorruption(GatewayError):
    """A stored cache record failed to parse or its checksum did not match."""
