"""Common package initialization."""
