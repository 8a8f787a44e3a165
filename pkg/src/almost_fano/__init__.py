"""Exact lattice and intersection-number checks for almost Fano del Pezzo fibrations."""

__version__ = "0.1.0"
