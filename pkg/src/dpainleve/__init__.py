"""Exact computer algebra for QRT maps, singularity confinement and
restoration of discrete Painlevé equations."""

__version__ = "0.1.0"
