from abc import ABC, abstractmethod
from typing import Any


class Scheme(ABC):
    """Abstract base class for comparison schemes evaluated on a drop."""

    scheme_id: str = ""

    @abstractmethod
    def evaluate(self, drop: Any) -> Any:
        """Run the scheme on a prepared drop and return its per-user outcome."""
        pass
