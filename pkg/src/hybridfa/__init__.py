"""Seedable simulator and optimizers for hybrid NOMA / over-the-air FL uplinks with fluid antennas."""

__version__ = "0.1.0"
