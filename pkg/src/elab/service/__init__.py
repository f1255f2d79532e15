"""The collaboration service: groups, uploads, on-demand analyses, posters."""

from .app import SESSION_COOKIE, create_app, serve
from .config import DEFAULT_MILESTONES, Milestone, ServiceConfig, load_config
from .workbench import Workbench

__all__ = [
    "SESSION_COOKIE",
    "create_app",
    "serve",
    "DEFAULT_MILESTONES",
    "Milestone",
    "ServiceConfig",
    "load_config",
    "Workbench",
]
