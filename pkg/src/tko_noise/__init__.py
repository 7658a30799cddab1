"""tko-noise - distributions of Teager-Kaiser operator outputs in Gaussian noise."""

from tko_noise.cli import main

__all__ = ["main"]
