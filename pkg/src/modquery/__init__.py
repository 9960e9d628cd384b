"""Seed-set expansion queries over ensembles of locally optimal modularity partitions."""

__version__ = "0.1.0"
