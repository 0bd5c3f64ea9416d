"""Networked wireless-charger simulation and user-charger assignment."""

__version__ = "0.1.0"
