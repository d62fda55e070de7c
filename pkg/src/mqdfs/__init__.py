"""Simulator and verification workbench for the multiple-quantum
decoherence-free subspace of a 13CH3 spin system."""

__version__ = "0.1.0"
