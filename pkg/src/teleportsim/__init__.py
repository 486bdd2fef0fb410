"""Simulator and verification harness for quantum and classical teleportation."""

__version__ = "0.1.0"
