"""arcmem: narrative-arc memory for serialized fiction.

Extracts typed storylines (anthology, soap, genre-specific) and their
per-episode progressions from episode summaries, persists them as
relational rows plus embeddings, and serves a curation API over both.
"""

__version__ = "0.1.0"
