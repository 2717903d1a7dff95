"""Grouping feature module."""
