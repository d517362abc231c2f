"""Pinned physical constants.

Exact SI values (2019 redefinition). Pinned here rather than imported from
scipy so that numeric artifacts are reproducible against a fixed reference.
"""

HBAR = 1.054571817e-34  # reduced Planck constant, J*s
KB = 1.380649e-23  # Boltzmann constant, J/K
