"""rxo: an object-relational engine where class specifications induce relations.

Path expressions over class components name relations and their attributes;
queries, views and set-oriented commands operate on those relations.
"""

from .engine import Result, Session
from .errors import RxoError
from .parser import parse_script
from .query import Relation
from .store import Database, snapshot_load, snapshot_save

__all__ = ["Database", "Relation", "Result", "RxoError", "Session", "parse_script",
           "snapshot_load", "snapshot_save"]
__version__ = "0.1.0"
