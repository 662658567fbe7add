"""SplitMix64: a counter-based 64-bit generator with cheap stream splitting.

Output ``i`` (0-based) of a stream seeded with ``s`` is ``mix64(s + (i + 1) * GAMMA)``,
so any implementation reproduces the same sequence from the constants below.
"""

GAMMA = 0x9E3779B97F4A7C15
MASK64 = 0xFFFFFFFFFFFFFFFF


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(seed: int, *path: int) -> int:
    """Seed of the child stream reached by following ``path`` from ``seed``."""
    s = seed & MASK64
    for index in path:
        s = mix64(s ^ mix64(((index + 1) * GAMMA) & MASK64))
    return s


class SplitMix64:
    def __init__(self, seed: int):
        self.seed = seed & MASK64
        self.state = self.seed

    def next_u64(self) -> int:
        self.state = (self.state + GAMMA) & MASK64
        return mix64(self.state)

    def below(self, bound: int) -> int:
        """Integer in ``[0, bound)`` by multiply-shift (no rejection step)."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self.next_u64() * bound) >> 64

    def uniform(self) -> float:
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def split(self, *path: int) -> "SplitMix64":
        return SplitMix64(derive_seed(self.seed, *path))

    def sample_without_replacement(self, n: int, k: int) -> list[int]:
        """``k`` distinct indices from ``range(n)`` via partial Fisher-Yates, sorted."""
        pool = list(range(n))
        for i in range(k):
            j = i + self.below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return sorted(pool[:k])

    def bootstrap(self, n: int) -> list[int]:
        return [self.below(n) for _ in range(n)]
