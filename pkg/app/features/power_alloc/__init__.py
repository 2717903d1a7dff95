"""Power allocation feature module."""
