"""HTTP job service wrapping the cleaning pipeline."""

from .app import create_app

__all__ = ["create_app"]
