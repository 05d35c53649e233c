"""Forward-pass accounting against a hard query budget."""

from __future__ import annotations

from .errors import BudgetExceededError


class QueryMeter:
    """Counts victim-model forward passes and enforces a hard cap."""

    def __init__(self, budget: int):
        if budget < 1:
            raise ValueError("budget must be >= 1")
        self.budget = budget
        self.forward_count = 0

    @property
    def remaining(self) -> int:
        return self.budget - self.forward_count

    def can_afford(self, n: int = 1) -> bool:
        return self.forward_count + n <= self.budget

    def charge(self, n: int = 1) -> None:
        """Record `n` forward passes; raises before any over-budget query."""
        if self.forward_count + n > self.budget:
            raise BudgetExceededError(
                f"query budget exhausted ({self.forward_count}/{self.budget}, need {n})"
            )
        self.forward_count += n
