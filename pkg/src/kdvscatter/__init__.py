"""Direct scattering for KdV with step-like one-gap periodic backgrounds."""

__version__ = "0.1.0"
