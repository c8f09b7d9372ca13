"""Causal categorization of mental-health social-media posts."""

from causalcat.corpus import CausalCategory, ColumnMap, Corpus, LabeledPost, Split

__all__ = ["CausalCategory", "ColumnMap", "Corpus", "LabeledPost", "Split"]
__version__ = "0.1.0"
