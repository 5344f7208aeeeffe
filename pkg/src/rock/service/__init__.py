"""HTTP service wrapping the scoring engine; the CLI is a thin client of this app."""

from .app import ServiceSettings, create_app

__all__ = ["ServiceSettings", "create_app"]
