from .extraction import extract_semantic_content
from .profiles import ProviderProfile, load_profiles
from .prompts import PromptTemplate, RenderedPrompt, get_template, template_versions
from .providers import (
    ChatProvider,
    Embedder,
    HTTPChatProvider,
    HTTPEmbedder,
    SentenceTransformerEmbedder,
)

__all__ = [
    "ChatProvider",
    "Embedder",
    "HTTPChatProvider",
    "HTTPEmbedder",
    "PromptTemplate",
    "ProviderProfile",
    "RenderedPrompt",
    "SentenceTransformerEmbedder",
    "extract_semantic_content",
    "get_template",
    "load_profiles",
    "template_versions",
]
