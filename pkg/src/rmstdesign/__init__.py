"""Design and analysis of randomized trials with restricted mean survival time."""

__version__ = "0.1.0"
