"""Feature tests package initialization."""
