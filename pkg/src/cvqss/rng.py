"""Counter-based random streams that do not depend on evaluation order.

Every draw is addressed by ``(seed, purpose, block)``. The Philox key is
``(seed, purpose_id)`` and the block index occupies the third counter word,
so each block owns a disjoint slice of the Philox sequence (a block never
consumes anywhere near 2**128 counter values). Pulses are grouped into fixed
blocks of ``BLOCK`` pulses; the block layout is independent of the number of
worker threads, hence so are the results.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

BLOCK = 8192
MASK64 = (1 << 64) - 1

PURPOSES = {
    "symbol_x": 1,
    "symbol_p": 2,
    "excess_x": 3,
    "excess_p": 4,
    "detector_x": 5,
    "detector_p": 6,
    "phase": 7,
    "disclosure": 8,
}


def block_generator(seed: int, purpose: str, block: int) -> np.random.Generator:
    key = np.array([seed & MASK64, PURPOSES[purpose]], dtype=np.uint64)
    counter = np.array([0, 0, block, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))


class CounterRNG:
    """Standard-normal arrays of shape ``(pulses, cols)`` generated block by block."""

    def __init__(self, seed: int, threads: int = 1):
        if seed < 0 or seed > MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.seed = int(seed)
        self.threads = max(1, int(threads))

    def _fill(self, purpose: str, out: np.ndarray, offset: int) -> np.ndarray:
        if offset % BLOCK:
            raise ValueError(f"offset must be a multiple of {BLOCK}")
        pulses = out.shape[0]
        first = offset // BLOCK
        blocks = range((pulses + BLOCK - 1) // BLOCK)

        def work(b: int) -> None:
            lo, hi = b * BLOCK, min((b + 1) * BLOCK, pulses)
            g = block_generator(self.seed, purpose, first + b)
            out[lo:hi] = g.standard_normal((hi - lo,) + out.shape[1:])

        if self.threads == 1:
            for b in blocks:
                work(b)
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                list(pool.map(work, blocks))
        return out

    def normal(
        self, purpose: str, pulses: int, cols: int | None = None, offset: int = 0
    ) -> np.ndarray:
        """Draws for pulses ``offset .. offset + pulses - 1`` (``offset`` block-aligned)."""
        shape = (pulses,) if cols is None else (pulses, cols)
        return self._fill(purpose, np.empty(shape), offset)

    def permutation(self, purpose: str, n: int) -> np.ndarray:
        # one-shot draw; block 0 of the purpose stream
        return block_generator(self.seed, purpose, 0).permutation(n)
