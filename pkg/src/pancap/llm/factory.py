"""Construct providers from profiles."""

from __future__ import annotations

from .mocks import (
    EchoChat,
    EntityCaptionerChat,
    HashedBagOfWordsEmbedder,
    NegationChat,
    OracleExtractorChat,
    OracleJudgeChat,
    ReplayChat,
)
from .profiles import ProviderProfile
from .providers import ChatProvider, Embedder, HTTPChatProvider, HTTPEmbedder, SentenceTransformerEmbedder

_CHAT = {
    "openai-chat": HTTPChatProvider,
    "mock-echo": EchoChat,
    "mock-oracle-extractor": lambda p: OracleExtractorChat(profile=p),
    "mock-oracle-judge": OracleJudgeChat,
    "mock-negation": NegationChat,
    "mock-entity-captioner": lambda p: EntityCaptionerChat(profile=p),
}
_EMBED = {
    "openai-embed": HTTPEmbedder,
    "sbert": SentenceTransformerEmbedder,
    "mock-hash-embed": lambda p: HashedBagOfWordsEmbedder(profile=p),
}


def make_chat(profile: ProviderProfile) -> ChatProvider:
    if profile.kind == "mock-replay":
        if not profile.transcript:
            raise ValueError(f"profile {profile.name!r} needs a transcript file")
        return ReplayChat(profile.transcript, profile)
    try:
        return _CHAT[profile.kind](profile)
    except KeyError:
        raise ValueError(f"profile {profile.name!r} of kind {profile.kind!r} is not a chat backend") from None


def make_embedder(profile: ProviderProfile) -> Embedder:
    try:
        return _EMBED[profile.kind](profile)
    except KeyError:
        raise ValueError(f"profile {profile.name!r} of kind {profile.kind!r} is not an embedding backend") from None
