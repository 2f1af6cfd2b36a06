"""Renormalization fixed points of Lorenz maps via a decoupled operator on inverse branches."""

from .errors import RenormError
from .funcrep import FuncRep, Interval

__all__ = ["FuncRep", "Interval", "RenormError"]
__version__ = "0.1.0"
