"""Deterministic splittable random streams.

One base seed fans out to independent Philox streams addressed by a
(purpose, a, b) counter triple, e.g. (risk, cycle, step). The address
occupies the high words of the 256-bit Philox counter, so distinct
addresses can never overlap while each stream retains 2**64 blocks of
headroom. Repeated construction of the same address reproduces the same
draws, which is what makes episodes replayable and batch results
independent of worker count.
"""

import numpy as np

# purpose ids (high counter word)
SCENARIO = 1
INIT_BELIEF = 2
LOCALIZER = 3
CONTROL_NOISE = 4
RISK_SAMPLES = 5
ORACLE = 6
BENCH = 7


def philox_key(seed: int) -> np.ndarray:
    """Derive a 128-bit Philox key from an integer seed."""
    return np.random.SeedSequence(int(seed)).generate_state(2, np.uint64)


class StreamTree:
    """Addressable family of independent generators derived from one seed."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._key = philox_key(seed)

    def stream(self, purpose: int, a: int = 0, b: int = 0) -> np.random.Generator:
        counter = np.array([0, b, a, purpose], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(counter=counter, key=self._key))

    def scenario(self):
        return self.stream(SCENARIO)

    def init_belief(self):
        return self.stream(INIT_BELIEF)

    def localizer(self, step: int):
        return self.stream(LOCALIZER, step)

    def control_noise(self, cycle: int):
        return self.stream(CONTROL_NOISE, cycle)

    def risk_samples(self, cycle: int, step: int):
        return self.stream(RISK_SAMPLES, cycle, step)
