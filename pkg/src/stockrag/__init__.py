"""Retrieval-augmented stock movement prediction harness.

Combines tabular financials with retrieved news chunks into anonymized
prompts for chat models, and scores the resulting predictions with an
imbalance-aware metric suite.
"""

__version__ = "0.1.0"
