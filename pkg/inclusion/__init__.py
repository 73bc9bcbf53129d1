"""Matrix formulation of the plane elastostatic inclusion problem."""
__version__ = "0.1.0"
