"""Design and simulation tools for frequency auto-homogenization by
group-velocity-matched difference-frequency generation."""

__version__ = "0.1.0"
