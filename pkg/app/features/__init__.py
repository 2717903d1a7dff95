"""Features package initialization."""
