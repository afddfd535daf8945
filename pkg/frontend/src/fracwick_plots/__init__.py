"""Figure rendering for fracwick experiment CSV outputs."""

__version__ = "0.1.0"

from .render import render
from .schemas import SCHEMAS, SchemaError, Table, load_table

__all__ = ["render", "SCHEMAS", "SchemaError", "Table", "load_table"]
