"""
EntLaser - polarization-entanglement laser simulator
"""

__version__ = "0.1.0"
