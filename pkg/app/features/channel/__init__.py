"""Channel feature module."""
