"""HTTP facade: explanation generation, evaluation, ratings, experiments."""

from .app import create_app
from .config import ServiceConfig

__all__ = ["ServiceConfig", "create_app"]
