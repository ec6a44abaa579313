"""Navigation metrics and the behavior-cloning error cost."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


@dataclass(frozen=True)
class TrialRecord:
    success: bool
    optimal_length: float
    actual_length: float

    def __post_init__(self):
        if self.actual_length < 0:
            raise ValueError("actual_length must be >= 0")


def success_rate(trials: Sequence[TrialRecord]) -> float:
    if not trials:
        raise ValueError("success_rate needs at least one trial")
    return sum(1 for t in trials if t.success) / len(trials)


def spl(trials: Sequence[TrialRecord]) -> float:
    """Success weighted by (optimal / max(actual, optimal)) path length."""
    if not trials:
        raise ValueError("spl needs at least one trial")
    total = 0.0
    for t in trials:
        if not t.optimal_length > 0:
            raise ValueError(f"optimal path length must be positive, got {t.optimal_length}")
        if t.success:
            total += t.optimal_length / max(t.actual_length, t.optimal_length)
    return total / len(trials)


def empirical_error(predict: Callable[[np.ndarray], int], labeled: Sequence[tuple[np.ndarray, int]]) -> float:
    """Fraction of samples whose predicted action differs from the label."""
    if not labeled:
        raise ValueError("empirical_error needs at least one sample")
    wrong = sum(1 for x, a in labeled if int(predict(x)) != int(a))
    return wrong / len(labeled)


def compounding_cost(T: int, eps_t: float) -> float:
    """Leading behavior-cloning rollout cost T^2 * eps_t."""
    if T < 1:
        raise ValueError("horizon T must be >= 1")
    if eps_t < 0:
        raise ValueError("eps_t must be >= 0")
    return float(T) ** 2 * eps_t
