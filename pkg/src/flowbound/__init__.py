"""Certified lower bounds for the group complexity of finite group
mapping monoids, computed through flows on the set-partition lattice of
the distinguished R-class."""

__version__ = "0.1.0"
