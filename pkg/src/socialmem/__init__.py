"""Social memory engine: a person graph plus bounded hybrid retrieval over chat history."""

from ._accel import NUMBA_ENABLED, backend
from .embedding import HashingEmbedder
from .engine import EngineConfig, SocialMemory
from .errors import SocialMemError
from .identity import FrameVote
from .retrieval import RetrievalConfig, RetrievedContext
from .vector_index import IndexEntry, IndexParams, VectorIndex
from .world_graph import PersonNode, RelationshipEdge, WorldGraph

__all__ = [
    "NUMBA_ENABLED",
    "backend",
    "EngineConfig",
    "FrameVote",
    "HashingEmbedder",
    "IndexEntry",
    "IndexParams",
    "PersonNode",
    "RelationshipEdge",
    "RetrievalConfig",
    "RetrievedContext",
    "SocialMemError",
    "SocialMemory",
    "VectorIndex",
    "WorldGraph",
]

__version__ = "0.1.0"
