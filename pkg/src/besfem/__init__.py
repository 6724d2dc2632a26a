"""Lumped zone thermal network and 3D FEM twin of a heavy test box."""

__version__ = "0.1.0"
