"""Hamiltonian dynamics on b^m-symplectic surfaces."""

__version__ = "0.1.0"
