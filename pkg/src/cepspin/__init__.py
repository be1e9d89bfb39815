"""Squeezing near critical exceptional points of dissipative collective spins.

Mean-field and Gaussian fluctuation theory, exact Dicke-sector steady
states and finite-size-scaling tools for models with a quadratic
Hamiltonian and jump operators linear in the collective spin.
"""

__version__ = "0.1.0"
