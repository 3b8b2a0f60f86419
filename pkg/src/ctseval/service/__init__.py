from .app import ServiceConfig, app_from_config, create_app, load_config  # noqa: F401
from .core import EvalService, ServiceError  # noqa: F401
