"""Deterministic counter-based random streams.

Every random quantity in this package is a pure function of a user
seed and a position, never of call order across components.  The
construction is the SplitMix64 finalizer over a keyed counter:

    out_t = unit(mix64(key + t * GOLDEN))        t = 1, 2, ...

where ``mix64`` is the usual xor-shift-multiply finalizer and
``unit`` maps the top 53 bits onto [0, 1).  Keys are derived by
folding words into a parent key:

    fold(key, w) = mix64(key ^ (w * FOLD_MULT))

so any component can address an independent stream by integer path
(seed, domain, index) without coordination.  Two properties matter:

* reproducibility is exact across runs, platforms and backends, and
  the compiled kernels implement the identical arithmetic;
* a stream for (seed, domain, j) never changes when other streams
  are consumed, so datasets are stable under reordering of work.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX_MULT_A = 0xBF58476D1CE4E5B9
MIX_MULT_B = 0x94D049BB133111EB
FOLD_MULT = 0xA24BAED4963EE407
ROOT_KEY = 0x243F6A8885A308D3

# domain words, folded once into the per-seed root key
DOMAIN_NOISE = 1
DOMAIN_CHANNEL = 2
DOMAIN_DRAWS = 3

_INV_2_53 = 2.0 ** -53


def mix64(z: int) -> int:
    """Finalize a 64-bit word (SplitMix64 mixer)."""
    z &= MASK64
    z ^= z >> 30
    z = (z * MIX_MULT_A) & MASK64
    z ^= z >> 27
    z = (z * MIX_MULT_B) & MASK64
    z ^= z >> 31
    return z


def fold(key: int, word: int) -> int:
    """Derive a child key from ``key`` and an integer ``word``."""
    return mix64((key ^ ((word & MASK64) * FOLD_MULT)) & MASK64)


def to_unit(word: int) -> float:
    """Map a 64-bit word onto [0, 1) using its top 53 bits."""
    return (word >> 11) * _INV_2_53


def mix64_array(z: np.ndarray) -> np.ndarray:
    """Vectorized :func:`mix64` over a uint64 array."""
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= np.uint64(MIX_MULT_A)
    z ^= z >> np.uint64(27)
    z *= np.uint64(MIX_MULT_B)
    z ^= z >> np.uint64(31)
    return z


def fold_array(key: int, words: np.ndarray) -> np.ndarray:
    """Vectorized :func:`fold` of many words into one key."""
    w = words.astype(np.uint64) * np.uint64(FOLD_MULT)
    w ^= np.uint64(key)
    return mix64_array(w)


def seed_root(seed: int) -> int:
    """Per-seed root key; negative seeds wrap modulo 2**64."""
    return fold(ROOT_KEY, seed)


def domain_key(seed: int, domain: int) -> int:
    """Key for one domain (noise, channel, ...) under a seed."""
    return fold(seed_root(seed), domain)


def stream_key(seed: int, domain: int, index: int) -> int:
    """Key for the ``index``-th stream of a domain under a seed."""
    return fold(domain_key(seed, domain), index)


class RngStream:
    """Sequential uniform stream over a fixed key.

    The t-th value (1-based) is ``to_unit(mix64(key + t * GOLDEN))``,
    so a stream can be re-created mid-sequence from (key, draws).

    Examples
    --------
    >>> a = RngStream(stream_key(42, DOMAIN_NOISE, 0))
    >>> b = RngStream(stream_key(42, DOMAIN_NOISE, 0))
    >>> [a.uniform() for _ in range(3)] == list(b.uniforms(3))
    True
    """

    __slots__ = ("key", "draws")

    def __init__(self, key: int, draws: int = 0):
        self.key = key & MASK64
        self.draws = draws

    def uniform(self) -> float:
        """Next value in [0, 1)."""
        self.draws += 1
        return to_unit(mix64((self.key + self.draws * GOLDEN) & MASK64))

    def uniforms(self, n: int) -> np.ndarray:
        """Next ``n`` values as a float64 array."""
        t = np.arange(self.draws + 1, self.draws + n + 1, dtype=np.uint64)
        self.draws += n
        words = mix64_array(np.uint64(self.key) + t * np.uint64(GOLDEN))
        return (words >> np.uint64(11)) * _INV_2_53

    def child(self, index: int) -> "RngStream":
        """Independent stream addressed by ``index`` under this key."""
        return RngStream(fold(self.key, index))


def noise_stream(seed: int, index: int) -> RngStream:
    """Noise stream for the ``index``-th skeleton of a run.

    The i-th draw is the noise value of the i-th declared variable,
    which is exactly what the batch samplers compute for row ``index``.
    """
    return RngStream(stream_key(seed, DOMAIN_NOISE, index))


def channel_stream(seed: int, index: int) -> RngStream:
    """Language-channel stream for the ``index``-th skeleton."""
    return RngStream(stream_key(seed, DOMAIN_CHANNEL, index))


def draw_stream(seed: int, index: int = 0) -> RngStream:
    """Auxiliary stream for statistical draws (subsampling, corruption)."""
    return RngStream(stream_key(seed, DOMAIN_DRAWS, index))
