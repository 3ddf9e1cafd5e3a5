from .artifact_store import ArtifactStore, ArtifactWriteError, emit, summary_document, version_string

__all__ = [
    "ArtifactStore",
    "ArtifactWriteError",
    "emit",
    "summary_document",
    "version_string",
]
