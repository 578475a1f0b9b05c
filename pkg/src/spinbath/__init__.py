"""MPS simulation of entanglement dynamics for an XXZ chain coupled to a long spin bath."""

__version__ = "0.1.0"
