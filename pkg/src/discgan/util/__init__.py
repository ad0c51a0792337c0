from .logging import Log

__all__ = ("Log",)
