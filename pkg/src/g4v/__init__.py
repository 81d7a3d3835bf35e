"""Effective-Hamiltonian toolkit for group-IV vacancy centers in diamond."""
__version__ = "0.1.0"
