"""Reference server for the textgate remote adapter protocol."""

from modelserve.config import DESC_PRESETS, ROLES, ServerConfig
from modelserve.engines import RoleLoadError, build_engines
from modelserve.app import create_app, serve

__all__ = [
    "DESC_PRESETS",
    "ROLES",
    "RoleLoadError",
    "ServerConfig",
    "build_engines",
    "create_app",
    "serve",
]
