"""Baselines tests package initialization."""
