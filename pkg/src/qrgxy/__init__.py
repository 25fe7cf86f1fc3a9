"""Quantum renormalization group analysis of the square-lattice XY model."""

__version__ = "0.1.0"
