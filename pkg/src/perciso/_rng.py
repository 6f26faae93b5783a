"""Counter-based randomness built on the splitmix64 finalizer.

Every random decision in the package reduces to hashing a 64-bit counter, so
results depend only on (seed, counter) and never on evaluation order.  The
same constants are hard-coded in the compiled core; the two must not drift.
"""

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
# Distinct increment for deriving sub-stream seeds, so that the stream of
# derived seeds never collides with the per-edge stream.
DERIVE = 0xD1B54A32D192ED03

U53 = float(1 << 53)


def finalize64(x: int) -> int:
    """splitmix64 output function on a 64-bit state."""
    z = x & MASK64
    z = (z ^ (z >> 30)) * MIX1 & MASK64
    z = (z ^ (z >> 27)) * MIX2 & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *indices: int) -> int:
    """Seed for a sub-stream, folding integer indices into the master seed.

    Used for per-sample seeds in Monte Carlo drivers: sample i gets
    derive_seed(master, i), so samples are independent of scheduling.
    """
    z = master & MASK64
    for k in indices:
        z = finalize64((z + ((k & MASK64) + 1) * DERIVE) & MASK64)
    return z


def open_threshold(p: float) -> int:
    """Integer threshold so that a 53-bit hash is below it with probability p.

    Monotone in p, which yields the standard coupling: the set of open edges
    under a shared seed is non-decreasing in p.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"percolation parameter must be in [0,1], got {p}")
    return int(p * U53)


class Stream:
    """Sequential splitmix64 stream, for scalar (non-hot) random decisions."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return finalize64(self.state)

    def u01(self) -> float:
        return (self.next_u64() >> 11) / U53

    def randint(self, n: int) -> int:
        return self.next_u64() % n
