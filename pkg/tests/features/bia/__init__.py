"""BIA tests package initialization."""
