"""Bidirectional entity-level recurrent decoding for event argument
extraction, with a self-contained differentiable-computation kernel."""

__version__ = "0.1.0"
