"""Geometry tests package initialization."""
