"""Grouping tests package initialization."""
