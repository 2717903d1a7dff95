"""NOMA rate feature module."""
