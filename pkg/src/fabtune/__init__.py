"""Autotuned optimization fabrics for planar serial arms."""
__version__ = "0.1.0"
