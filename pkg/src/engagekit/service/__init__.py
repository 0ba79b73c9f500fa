"""Service layer: request/response schemas, handlers, HTTP app factory."""

from . import handlers, schemas

__all__ = ["handlers", "schemas", "create_app"]


def create_app():
    # deferred so importing the handlers does not require fastapi
    from .app import create_app as _factory
    return _factory()
