"""Provider abstractions with retry, bounded concurrency and a replay cache."""

from groundline.gateway.cache import CacheKey, ResponseCache
from groundline.gateway.client import ChatProvider, EmbedProvider, Gateway
from groundline.gateway.errors import CacheCorruption, GatewayError, ProviderError, TransportError
from groundline.gateway.http import HttpChatProvider, HttpEmbedProvider
from groundline.gateway.messages import ChatRequest, EmbeddingVector, Message
from groundline.gateway.offline import OfflineChatProvider, OfflineEmbedProvider, request_fingerprint


def offline_chat_provider(config=None) -> OfflineChatProvider:
    return OfflineChatProvider.from_config(config)


def offline_embed_provider(dim: int = 512, seed: int = 0) -> OfflineEmbedProvider:
    return OfflineEmbedProvider(dim=dim, seed=seed)


__all__ = [
    "CacheCorruption",
    "CacheKey",
    "ChatProvider",
    "ChatRequest",
    "EmbedProvider",
    "EmbeddingVector",
    "Gateway",
    "GatewayError",
    "HttpChatProvider",
    "HttpEmbedProvider",
    "Message",
    "OfflineChatProvider",
    "OfflineEmbedProvider",
    "ProviderError",
    "ResponseCache",
    "TransportError",
    "offline_chat_provider",
    "offline_embed_provider",
    "request_fingerprint",
]
