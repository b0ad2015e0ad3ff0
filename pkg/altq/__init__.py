"""Equilibrium analysis of an M/M/1 queue alternating between observable and unobservable periods."""

__version__ = "0.1.0"
