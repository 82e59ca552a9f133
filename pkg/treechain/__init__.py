"""Markov chains on trees: invariant measures, recurrence and path sums"""

__version__ = "0.1.0"
