"""Backlog grooming engine: semantic duplicate detection with human-confirmed apply."""

__version__ = "0.1.0"

from .dedup import DuplicateCandidate, DuplicateCluster, EngineConfig  # noqa: F401
from .embedding import EmbeddingClient, EmbeddingConfig, EmbeddingVector  # noqa: F401
from .errors import ConfigError, GroomerError  # noqa: F401
from .index import VectorIndex  # noqa: F401
from .model import BacklogSnapshot, Issue, IssuePair, IssueStatus  # noqa: F401
