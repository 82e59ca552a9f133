"""Seeded randomness streams"""

from __future__ import annotations

import numpy as np

from .const import SIMULATION_BLOCK


class UniformStream:
    """Buffered uniforms on [0, 1) from a PCG64 generator seeded by a SeedSequence"""

    def __init__(
        self,
        seed: int | np.random.SeedSequence | None = 0,
        block: int = SIMULATION_BLOCK,
    ):
        if isinstance(seed, np.random.SeedSequence):
            self.seed_sequence = seed
        else:
            self.seed_sequence = np.random.SeedSequence(seed)

        self.generator = np.random.Generator(np.random.PCG64(self.seed_sequence))
        self.block = block
        self._buffer = np.empty(0)
        self._position = 0

    @property
    def seed(self) -> int | None:
        return self.seed_sequence.entropy

    def uniform(self) -> float:
        if self._position >= len(self._buffer):
            self._buffer = self.generator.random(self.block)
            self._position = 0

        value = self._buffer[self._position]
        self._position += 1

        return float(value)

    def choice(self, weights: np.ndarray | list[float], size: int | None = None):
        """Indices drawn with the given (unnormalized) weights"""
        probabilities = np.asarray(weights, dtype=float)
        probabilities = probabilities / probabilities.sum()

        return self.generator.choice(len(probabilities), size=size, p=probabilities)

    def integers(self, high: int) -> int:
        return int(self.generator.integers(high))

    def spawn(self, count: int) -> list[UniformStream]:
        """Independent child streams, stable regardless of how they are scheduled"""
        return [
            UniformStream(child, self.block)
            for child in self.seed_sequence.spawn(count)
        ]


def spawn_streams(seed: int | None, count: int) -> list[UniformStream]:
    return UniformStream(seed).spawn(count)
