"""Motif-based expressivity tooling for knowledge-graph link prediction."""

__version__ = "0.1.0"
