"""Work counters used to check the allocator's complexity envelope."""

from collections import Counter
from dataclasses import dataclass, field


@dataclass
class EvaluationCounter:
    """Counts rate-function evaluations, keyed by call site.

    Passed explicitly into the solvers; there is no process-global counter,
    so parallel drops never share one.
    """

    counts: Counter = field(default_factory=Counter)

    def tick(self, key: str = "rate", n: int = 1) -> None:
        self.counts[key] += n

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def reset(self) -> None:
        self.counts.clear()
