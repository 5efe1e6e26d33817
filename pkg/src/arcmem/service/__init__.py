"""HTTP API binding the stores, gateway, and pipeline together."""

from .app import create_app
from .runs import RunConflictError, RunHandle, RunRegistry
from .runtime import build_gateway, build_stores

__all__ = ["create_app", "RunConflictError", "RunHandle", "RunRegistry", "build_gateway", "build_stores"]
