"""Symplectic Euler, alternating mirror descent and their modified Hamiltonians."""

__version__ = "0.1.0"
