"""Annotation-free hierarchical CoT synthesis and coherence-aware verifiable rewards."""

__version__ = "0.1.0"
