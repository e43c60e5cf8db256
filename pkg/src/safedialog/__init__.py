"""Coherence-relation-aware active learning for a multimodal safety-dialogue
agent: corpus management, relation inventories, clustering-based selection,
pluggable model backends, the training loop, evaluation, and an HTTP service.
"""

__version__ = "0.1.0"
