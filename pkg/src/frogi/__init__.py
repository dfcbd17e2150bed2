"""Hierarchical component runtime deployed as installable bundles."""

__version__ = "0.1.0"
