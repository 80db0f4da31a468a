"""HTTP service exposing the evaluation pipeline."""

from .app import create_app
from .client import SyncASGITransport, in_process_client

__all__ = ["SyncASGITransport", "create_app", "in_process_client"]
