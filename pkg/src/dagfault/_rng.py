"""Portable shuffling PRNG used for data splits.

Split and fold assignment must not drift across numpy releases, so it runs on
xoshiro256** (Blackman & Vigna, reference C implementation, version 1.0)
seeded through splitmix64. Everything numerical elsewhere uses
``numpy.random.Generator``.
"""

_MASK = (1 << 64) - 1

ALGORITHM = "xoshiro256**-1.0/splitmix64"


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


def splitmix64(state):
    """Return ``(output, new_state)`` for one splitmix64 step."""
    state = (state + 0x9E3779B97F4A7C15) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31), state


class Xoshiro256:
    """xoshiro256** generator with unbiased bounded draws."""

    def __init__(self, seed=0, state=None):
        if state is not None:
            s = [int(v) & _MASK for v in state]
            if len(s) != 4 or not any(s):
                raise ValueError("state must be four words, not all zero")
            self.s = s
            return
        x = int(seed) & _MASK
        s = []
        for _ in range(4):
            out, x = splitmix64(x)
            s.append(out)
        self.s = s

    def next_u64(self):
        s = self.s
        result = (_rotl((s[1] * 5) & _MASK, 7) * 9) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def below(self, n):
        """Uniform integer in ``[0, n)`` by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        threshold = ((1 << 64) - n) % n
        while True:
            r = self.next_u64()
            if r >= threshold:
                return r % n

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle of a list; returns the list."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
