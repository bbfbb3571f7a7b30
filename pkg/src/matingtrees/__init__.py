"""Mating-of-trees bijections for random planar maps and their walk-encoded graphs."""
__version__ = "0.1.0"
