"""Simulation harness tests package initialization."""
