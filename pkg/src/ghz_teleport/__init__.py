"""Simulation of EPR-pair and EPR-nplet teleportation through GHZ entanglement."""

__version__ = "0.1.0"
