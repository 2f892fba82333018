"""Text classification over per-document word co-occurrence graphs."""

__version__ = "0.1.0"
