"""Structure-preserving finite-difference solver for Poisson-Nernst-Planck-Cahn-Hilliard systems."""

__version__ = "0.1.0"
