from . import config, errors, formatter

__all__ = ("config", "errors", "formatter")
