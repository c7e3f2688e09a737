"""Transient cost of SIS epidemics on random and real networks."""

__version__ = "0.1.0"
