"""Circuits, resource estimates and Trotter-error numerics for disordered
Heisenberg models on regular graphs."""

__version__ = "0.1.0"
