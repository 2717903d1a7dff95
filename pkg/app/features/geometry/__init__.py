"""Geometry feature module."""
