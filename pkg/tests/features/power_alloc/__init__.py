"""Power allocation tests package initialization."""
