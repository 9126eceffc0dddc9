"""Feature transplantation toolkit for C product lines."""

__version__ = "0.1.0"
