"""Contact processes on random graphs and trees: simulation, couplings and recursive bounds."""

__version__ = "0.1.0"
