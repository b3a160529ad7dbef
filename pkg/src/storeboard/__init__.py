"""storeboard: a star-schema retail analytics engine with a DAX-subset
measure language, reproducible diagnostics, narrative dashboard lint,
and an HTTP query API."""

__version__ = "0.1.0"
