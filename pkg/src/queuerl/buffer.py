"""Experience replay: a bounded FIFO of transitions with uniform sampling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InsufficientBuffer


@dataclass
class Experience:
    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray

    def __post_init__(self):
        if len(self.state) != len(self.next_state):
            raise DimensionMismatch("state and next_state lengths differ")


class ReplayBuffer:
    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self._storage: list[Experience] = []
        self._next = 0  # ring-buffer write position once full

    def __len__(self) -> int:
        return len(self._storage)

    @property
    def size(self) -> int:
        return len(self._storage)

    def push(self, exp: Experience) -> None:
        if len(self._storage) < self.capacity:
            self._storage.append(exp)
        else:
            self._storage[self._next] = exp
            self._next = (self._next + 1) % self.capacity

    def sample(self, batch_size: int, rng: np.random.Generator) -> list[Experience]:
        """Uniform sample without replacement; raises if undersized."""
        if batch_size > len(self._storage):
            raise InsufficientBuffer(
                f"requested {batch_size} experiences, buffer holds {len(self._storage)}"
            )
        idx = rng.choice(len(self._storage), size=batch_size, replace=False)
        return [self._storage[i] for i in idx]

    def sample_states(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """States of `count` experiences drawn uniformly with replacement."""
        if not self._storage:
            raise InsufficientBuffer("buffer is empty")
        idx = rng.integers(0, len(self._storage), size=count)
        return np.stack([self._storage[i].state for i in idx])

    def all_experiences(self) -> list[Experience]:
        return list(self._storage)

    def newest(self, count: int) -> list[Experience]:
        """The most recent `count` experiences, oldest first."""
        count = min(count, len(self._storage))
        if len(self._storage) < self.capacity:
            return self._storage[-count:]
        order = self._storage[self._next :] + self._storage[: self._next]
        return order[-count:]
