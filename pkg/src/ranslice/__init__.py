"""Multi-tenant RAN slicing simulator for a single downlink cell."""

__version__ = "0.1.0"
