"""gblab: a simulation laboratory for graph-informed low-rank matrix bandits."""

__version__ = "0.1.0"
