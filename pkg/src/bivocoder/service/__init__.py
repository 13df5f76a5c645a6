"""HTTP inference service around a loaded model."""

from .app import create_app

__all__ = ["create_app"]
