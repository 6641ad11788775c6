"""Probabilistic generalized-LR parsing of PoS and punctuation label
sequences: feature-annotated grammars, LALR(1) tables with conflicts kept,
packed parse forests, Good-Turing-smoothed transition probabilities, n-best
extraction, and GEIG/coverage evaluation."""

__version__ = "0.1.0"
