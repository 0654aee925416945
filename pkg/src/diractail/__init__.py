"""Mode-by-mode evolution of massless spin-1/2 fields on a Schwarzschild
background in hyperboloidal coordinates, with conservation-law,
Newman-Penrose and late-time-tail diagnostics."""

__version__ = "0.1.0"

from . import background, swsh, evolve, diagnostics, asymptotics  # noqa: F401
