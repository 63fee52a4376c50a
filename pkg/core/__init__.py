from .morph import Morph

__all__ = ("Morph",)
