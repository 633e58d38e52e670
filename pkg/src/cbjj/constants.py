"""CODATA 2018 physical constants (SI), shared by every module."""

PLANCK = 6.62607015e-34  # J s, exact
HBAR = 1.05457181765e-34  # J s
ELEMENTARY_CHARGE = 1.602176634e-19  # C, exact
BOLTZMANN = 1.380649e-23  # J/K, exact
FLUX_QUANTUM = 2.06783384846e-15  # Wb, h / 2e

TWO_PI = 6.283185307179586
