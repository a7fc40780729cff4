"""Splittable, counter-based random streams.

Every stream is a Philox generator keyed by ``(master_seed, stream_id)``.
Child streams get ids derived by hashing, so replica ``r`` of experiment
``e`` always sees the same numbers no matter which worker runs it.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _hash64(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        h.update(repr(part).encode("utf-8"))
        h.update(b"\x1f")
    return int.from_bytes(h.digest(), "little")


def stream_id_for(experiment: str, replica: int) -> int:
    """Stable 64-bit stream id for replica ``replica`` of ``experiment``."""
    return _hash64(str(experiment), int(replica))


class RngStream:
    """A reproducible random stream.

    Identical ``(master_seed, stream_id, position)`` triples reproduce the
    identical output sequence.  ``position`` counts 256-bit Philox blocks.
    """

    def __init__(self, master_seed: int, stream_id: int = 0, position: int = 0):
        self.master_seed = int(master_seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.random.SeedSequence([self.master_seed, self.stream_id]).generate_state(2, np.uint64)
        self._bitgen = np.random.Philox(key=key, counter=int(position))
        self.gen = np.random.Generator(self._bitgen)
        self.spawned: list[int] = []

    @property
    def position(self) -> int:
        counter = self._bitgen.state["state"]["counter"]
        return sum(int(word) << (64 * i) for i, word in enumerate(counter))

    def spawn(self, *labels) -> "RngStream":
        """Independent child stream addressed by ``labels``."""
        child_id = _hash64(self.stream_id, *labels)
        self.spawned.append(child_id)
        return RngStream(self.master_seed, child_id)

    def __repr__(self) -> str:
        return f"RngStream(master_seed={self.master_seed}, stream_id={self.stream_id}, position={self.position})"
