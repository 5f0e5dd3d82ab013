"""Conservation laws with heterogeneous multiplicative fluxes."""

__version__ = "0.1.0"
