"""NOMA rate tests package initialization."""
