"""Seeded, platform-independent random streams.

Every stochastic decision in a run draws from a named stream derived from the
run's master seed, so runs replay bit-exactly regardless of platform or
Python hash randomization. The generator is SplitMix64; stream seeds are
``master_seed XOR FNV-1a-64(name)``.
"""

from __future__ import annotations

_MASK64 = 0xFFFFFFFFFFFFFFFF

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(text: str) -> int:
    """64-bit FNV-1a hash of the UTF-8 encoding of ``text``."""
    h = _FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


class SplitMix64:
    """SplitMix64 sequence generator.

    Draw conventions (normative for replayable draws):
      * ``next_u64`` is the primitive; everything else wraps it.
      * ``random`` maps the top 53 bits to [0, 1).
      * ``randrange(n)`` is ``next_u64() % n`` (modulo bias is irrelevant at
        simulation scale and keeps the mapping trivially replayable).
    """

    __slots__ = ("_state",)

    def __init__(self, seed: int):
        self._state = seed & _MASK64

    @property
    def state(self) -> int:
        return self._state

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK64
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        return (self.next_u64() >> 11) * (2.0**-53)

    def randrange(self, n: int) -> int:
        if n <= 0:
            raise ValueError("randrange() requires n >= 1")
        return self.next_u64() % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        if hi < lo:
            raise ValueError("randint() requires lo <= hi")
        return lo + self.randrange(hi - lo + 1)

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def choice(self, seq):
        if not seq:
            raise ValueError("choice() on empty sequence")
        return seq[self.randrange(len(seq))]


def derive_stream(master_seed: int, name: str) -> SplitMix64:
    """Named stream for one concern (``init``, ``decide``, ``reeval``, ``social``)."""
    return SplitMix64((master_seed & _MASK64) ^ fnv1a64(name))
