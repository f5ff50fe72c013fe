"""kellysortino - Sortino-optimal Kelly allocations."""

__version__ = "0.1.0"
