"""Enhanced shortcuts to adiabaticity: analytical corrections to STA protocols."""

__version__ = "0.1.0"
