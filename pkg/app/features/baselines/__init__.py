"""Baselines feature package initialization."""
