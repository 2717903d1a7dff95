"""Channel tests package initialization."""
