"""Reproducible, addressable random streams.

Every spell in every replication owns a stream keyed by
``(base_seed, replication, spell)``.  A stream is counter based: the draw at
position ``c`` is a pure function of ``(key, c)``, computed with the
SplitMix64 finalizer.  This lets the generators evaluate whole panels at once
with numpy while keeping each spell's draws independent of ``n``, of the
execution order and of the worker count.

Positions are either sequential (``RngStream.draw_*``) or structured
addresses built with :func:`address` (purpose, period, item) so that the
simulation of spell ``i`` never depends on how many draws another spell used.

Normal variates use inversion (``scipy.special.ndtri``) of an open-interval
uniform.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0 ** -53

# address purposes
P_SEQ = 0
P_ALPHA = 1
P_EXIT = 2
P_Y_CONT = 3
P_XI = 4
P_CALLBACK = 5
P_OFFER = 6
P_PROXY = 7


def mix64(x):
    """SplitMix64 finalizer, a bijection on uint64 (vectorised)."""
    z = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = z + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        z = z ^ (z >> np.uint64(31))
    return z


def _u64(value) -> np.ndarray:
    if isinstance(value, (int, np.integer)):
        return np.array(int(value) & _MASK64, dtype=np.uint64)
    return np.asarray(value).astype(np.uint64)


def stream_keys(base_seed: int, replication: int, spell) -> np.ndarray:
    """Keys of the per-spell streams; ``spell`` may be an int or an array."""
    k0 = mix64(_u64(base_seed))
    k1 = mix64(k0 ^ _u64(replication))
    return mix64(k1 ^ _u64(spell))


def address(purpose: int, t=0, item=0) -> np.ndarray:
    """Pack (purpose, period, item) into a 64-bit stream position."""
    t = np.asarray(t, dtype=np.uint64)
    item = np.asarray(item, dtype=np.uint64)
    return (np.uint64(purpose) << np.uint64(56)) | (t << np.uint64(32)) | item


def _bits(keys, positions) -> np.ndarray:
    return mix64(np.asarray(keys, dtype=np.uint64) ^ mix64(positions))


def uniform_at(keys, positions) -> np.ndarray:
    """U[0, 1) draws at the given positions of the given streams."""
    return (_bits(keys, positions) >> np.uint64(11)).astype(np.float64) * _TWO_M53


def open_uniform_at(keys, positions) -> np.ndarray:
    """U(0, 1) draws (never exactly 0 or 1), used for inversion."""
    b = (_bits(keys, positions) >> np.uint64(11)).astype(np.float64)
    return (b + 0.5) * _TWO_M53


def normal_at(keys, positions) -> np.ndarray:
    """Standard normal draws by inversion."""
    return ndtri(open_uniform_at(keys, positions))


class RngStream:
    """Sequential view over one spell's stream.

    Parameters
    ----------
    base_seed, replication, spell : int
        Origin of the stream.  Identical origins give identical sequences.
    """

    def __init__(self, base_seed: int, replication: int, spell: int):
        if replication < 0 or spell < 0:
            raise ValueError("replication and spell indices must be non-negative")
        self.origin = (int(base_seed), int(replication), int(spell))
        self.key = stream_keys(base_seed, replication, spell)
        self.position = 0

    def _next_positions(self, size: int) -> np.ndarray:
        pos = address(P_SEQ, 0, np.arange(self.position, self.position + size, dtype=np.uint64))
        self.position += size
        return pos

    def uniforms(self, size: int) -> np.ndarray:
        return uniform_at(self.key, self._next_positions(size))

    def normals(self, size: int) -> np.ndarray:
        return normal_at(self.key, self._next_positions(size))

    def draw_uniform(self, lo: float, hi: float, size: int | None = None):
        if not lo < hi:
            raise ValueError(f"uniform bounds require lo < hi, got lo={lo}, hi={hi}")
        u = lo + (hi - lo) * self.uniforms(1 if size is None else size)
        return float(u[0]) if size is None else u

    def draw_normal(self, mean: float, sd: float, size: int | None = None):
        if sd < 0:
            raise ValueError(f"normal sd must be >= 0, got {sd}")
        z = self.normals(1 if size is None else size)
        x = mean + sd * z if sd > 0 else np.full_like(z, mean)
        return float(x[0]) if size is None else x

    def draw_bernoulli(self, p: float, size: int | None = None):
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"bernoulli probability must lie in [0, 1], got {p}")
        b = (self.uniforms(1 if size is None else size) < p).astype(np.int64)
        return int(b[0]) if size is None else b


def derive_stream(base_seed: int, replication: int, spell: int) -> RngStream:
    return RngStream(base_seed, replication, spell)


def draw_uniform(stream: RngStream, lo: float, hi: float, size: int | None = None):
    return stream.draw_uniform(lo, hi, size)


def draw_normal(stream: RngStream, mean: float, sd: float, size: int | None = None):
    return stream.draw_normal(mean, sd, size)


def draw_bernoulli(stream: RngStream, p: float, size: int | None = None):
    return stream.draw_bernoulli(p, size)


def proxy_shocks(base_seed: int, replication: int, n: int) -> np.ndarray:
    """Standard-normal, time-invariant proxy noise, one draw per spell."""
    keys = stream_keys(base_seed, replication, np.arange(n, dtype=np.uint64))
    return normal_at(keys, address(P_PROXY))
