"""Long-term memory: relational persistence, vector retrieval, analytics."""

from .analytics import ClusterAssignment, cluster_embeddings, jaccard_similarity, pca_project_3d
from .memory import MemoryStores, MergeConflictError, embedding_record_id
from .relational import (
    AppellationCollisionError,
    ReferentialIntegrityError,
    RelationalStore,
    StoreError,
    UnknownIdError,
)
from .vectors import (
    DimensionMismatchError,
    EmbeddingRecord,
    QueryFilter,
    SimilarityHit,
    VectorStore,
    VectorStoreError,
    ZeroVectorError,
    cosine_similarity,
)

__all__ = [
    "ClusterAssignment",
    "cluster_embeddings",
    "jaccard_similarity",
    "pca_project_3d",
    "MemoryStores",
    "MergeConflictError",
    "embedding_record_id",
    "AppellationCollisionError",
    "ReferentialIntegrityError",
    "RelationalStore",
    "StoreError",
    "UnknownIdError",
    "DimensionMismatchError",
    "EmbeddingRecord",
    "QueryFilter",
    "SimilarityHit",
    "VectorStore",
    "VectorStoreError",
    "ZeroVectorError",
    "cosine_similarity",
]
