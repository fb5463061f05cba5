"""Metastability of the Blume-Capel model on a two-dimensional torus.

Exact energetics, droplet geometry, potential theory for finite reversible
chains, and a rejection-free kinetic Monte Carlo engine.
"""

from .spin_lattice import EnergyParts, ModelParams, ParameterError, RegimeError, SpinConfiguration, energy_total

__all__ = ["EnergyParts", "ModelParams", "ParameterError", "RegimeError", "SpinConfiguration", "energy_total"]
__version__ = "0.1.0"
