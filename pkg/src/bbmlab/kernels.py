"""Low-level randomness: counter-addressed streams and exact samplers.

Every random draw in this package is a pure function of
``(seed, stream_id, counter)``.  Streams never share state, so replicas
can be simulated in any order, on any number of workers, and replayed
bit-identically.  The mixing function is two full splitmix64-style
avalanche rounds over the (key, counter) pair, which is comfortably
beyond what the Monte Carlo statistics here can resolve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_SEED_SALT = 0xA0761D6478BD642F
_KEY1_SALT = 0xE7037ED1A0B428DB
_CHILD_SALT = (0x8EBC6AF09C88C6E3, 0x589965CC75374CC3)

_U_GOLDEN = np.uint64(_GOLDEN)
_INV_2_53 = 2.0 ** -53


class ParameterError(ValueError):
    """A sampler was called with an out-of-range parameter."""


def _mix64_int(z: int) -> int:
    """splitmix64 finalizer on a Python int (key derivation path)."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _mix64(z: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer on uint64 arrays (wrapping)."""
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def stream_key(seed: int, stream_id: int) -> tuple[int, int]:
    """Derive the 128-bit key of stream (seed, stream_id)."""
    k0 = _mix64_int(_mix64_int((seed & _MASK) ^ _SEED_SALT) + (stream_id & _MASK))
    k1 = _mix64_int(k0 ^ _KEY1_SALT)
    return k0, k1


EVENT_STREAM_SALT = 0x2545F4914F6CDD1D
MOTION_STREAM_SALT = 0x9FB21C651E98DF25


def derive_pair(k0, k1, salt: int) -> tuple[np.ndarray, np.ndarray]:
    """A labeled substream key pair derived from a parent key pair."""
    d0 = _mix64(np.asarray(k0, dtype=np.uint64) ^ np.uint64(salt))
    d1 = _mix64(d0 ^ np.asarray(k1, dtype=np.uint64))
    return d0, d1


def spawn_keys(k0: np.ndarray, k1: np.ndarray, spawn_index: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Identity key for the offspring spawned at a particle's branch event.

    The parent keeps its own streams (spine representation); offspring
    identity is (parent identity, number of prior spawns), so the family
    tree does not depend on how finely motion was monitored.
    """
    z = _mix64(k0 + (np.asarray(spawn_index, dtype=np.uint64) * _U_GOLDEN ^ np.uint64(_CHILD_SALT[0])))
    c0 = _mix64(z ^ k1)
    c1 = _mix64(c0 + np.uint64(_CHILD_SALT[1]))
    return c0, c1


def raw_u64(k0, k1, counter) -> np.ndarray:
    """Draw ``counter``-addressed raw 64-bit words for keys (k0, k1).

    All arguments broadcast; counters are uint64 draw indices.  Inputs
    are promoted to arrays so wrapping arithmetic stays silent.
    """
    c = np.atleast_1d(np.asarray(counter, dtype=np.uint64))
    z = np.asarray(k0, dtype=np.uint64) ^ (c * _U_GOLDEN)
    z = _mix64(z)
    z = z ^ np.asarray(k1, dtype=np.uint64)
    out = _mix64(z)
    return out if np.ndim(counter) or np.ndim(k0) else out[0]


def u64_to_unit(u: np.ndarray) -> np.ndarray:
    """Map raw words to uniforms on the open interval (0, 1), 53-bit."""
    return ((u >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53


def uniform_at(k0, k1, counter) -> np.ndarray:
    return u64_to_unit(raw_u64(k0, k1, counter))


def gaussian_at(k0, k1, counter) -> np.ndarray:
    """Standard normals via inverse CDF; one counter per variate."""
    return ndtri(uniform_at(k0, k1, counter))


@dataclass
class RngStream:
    """A reproducible counter-addressed random stream.

    Draw k of stream (seed, stream_id) is a pure function of
    (seed, stream_id, k).  ``counter`` is the index of the next draw;
    replaying from counter 0 reproduces the sequence exactly.
    """

    seed: int
    stream_id: int
    counter: int = 0
    _key: tuple[int, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self._key = stream_key(self.seed, self.stream_id)

    def spawn(self, stream_id: int) -> "RngStream":
        """A fresh stream of the same seed with a different id."""
        return RngStream(self.seed, stream_id)

    def _take(self, n: int) -> np.ndarray:
        ctr = np.arange(self.counter, self.counter + n, dtype=np.uint64)
        self.counter += n
        return raw_u64(self._key[0], self._key[1], ctr)

    def uniform(self, n: int | None = None):
        u = u64_to_unit(self._take(1 if n is None else n))
        return float(u[0]) if n is None else u

    def gaussian(self, n: int | None = None):
        z = ndtri(u64_to_unit(self._take(1 if n is None else n)))
        return float(z[0]) if n is None else z

    def exponential(self, rate: float, n: int | None = None):
        if rate <= 0:
            raise ParameterError(f"exponential rate must be > 0, got {rate}")
        u = u64_to_unit(self._take(1 if n is None else n))
        x = -np.log(u) / rate
        return float(x[0]) if n is None else x

    def poisson(self, mean: float) -> int:
        """Poisson count via the exponential race (exact, variable draws)."""
        if mean < 0:
            raise ParameterError(f"poisson mean must be >= 0, got {mean}")
        if mean == 0:
            return 0
        count, acc = 0, 0.0
        while True:
            block = max(16, int(mean - acc + 6.0 * math.sqrt(mean) + 16))
            gaps = self.exponential(1.0, block)
            csum = acc + np.cumsum(gaps)
            over = np.searchsorted(csum, mean, side="right")
            count += int(over)
            if over < block:
                return count
            acc = float(csum[-1])


@dataclass(frozen=True)
class Box:
    """An axis-aligned box given by per-dimension (lo, hi) bounds."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.lo) != len(self.hi) or not self.lo:
            raise ParameterError("box needs matching nonempty lo/hi bounds")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ParameterError(f"degenerate box: lo={self.lo} hi={self.hi}")

    @classmethod
    def cube(cls, half_width: float, dim: int) -> "Box":
        return cls((-half_width,) * dim, (half_width,) * dim)

    @classmethod
    def from_arrays(cls, lo, hi) -> "Box":
        return cls(tuple(float(x) for x in lo), tuple(float(x) for x in hi))

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod([h - l for l, h in zip(self.lo, self.hi)]))

    def padded(self, margin: float) -> "Box":
        return Box(tuple(l - margin for l in self.lo), tuple(h + margin for h in self.hi))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Vectorized membership for an (n, dim) array of points."""
        pts = np.atleast_2d(points)
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def side_lengths(self) -> np.ndarray:
        return np.asarray(self.hi) - np.asarray(self.lo)


@dataclass(frozen=True)
class BridgeQuery:
    """Radial barrier-crossing query for one monitoring sub-step.

    from_radius / to_radius are |x| at the step endpoints, barrier is
    the kill radius and step the elapsed time.
    """

    from_radius: float
    to_radius: float
    barrier: float
    step: float

    def __post_init__(self) -> None:
        if self.step <= 0:
            raise ParameterError(f"bridge step must be > 0, got {self.step}")


def sample_exponential(stream: RngStream, rate: float) -> float:
    """One Exp(rate) lifetime."""
    return stream.exponential(rate)


def sample_gaussian_step(stream: RngStream, dim: int, step: float) -> np.ndarray:
    """A d-dimensional Brownian increment over time ``step``."""
    if step <= 0:
        raise ParameterError(f"step must be > 0, got {step}")
    if dim < 1:
        raise ParameterError(f"dim must be >= 1, got {dim}")
    return stream.gaussian(dim) * math.sqrt(step)


def bridge_crossing_probability(q: BridgeQuery) -> float:
    """One-sided Brownian bridge level-crossing probability.

    Applied to the radial coordinate: the chance that a bridge from
    from_radius to to_radius over ``step`` touches the barrier.  Exact
    for a linear coordinate; for the radial coordinate of a d-ball it
    is the leading-order correction, exact as step -> 0.  Endpoints at
    or beyond the barrier make the crossing certain.
    """
    a = q.barrier - q.from_radius
    b = q.barrier - q.to_radius
    if a <= 0 or b <= 0:
        return 1.0
    return min(1.0, math.exp(-2.0 * a * b / q.step))


def bridge_max_sample(from_r, to_r, step, u):
    """Sample the running maximum of the radial bridge on a sub-step.

    Inverse-CDF draw from P(M >= m) = exp(-2 (m-a)(m-b) / step) for
    m >= max(a, b); ``u`` is a uniform in (0, 1).  Vectorized.  The
    result always dominates both endpoints, so comparing it with the
    barrier reproduces the Bernoulli crossing decision of
    :func:`bridge_crossing_probability` while also updating the running
    ancestral sup-norm.
    """
    a = np.asarray(from_r, dtype=np.float64)
    b = np.asarray(to_r, dtype=np.float64)
    q = -2.0 * np.asarray(step, dtype=np.float64) * np.log(u)
    return 0.5 * ((a + b) + np.sqrt((a - b) ** 2 + q))


def sample_ppp_in_box(stream: RngStream, intensity: float, box: Box) -> np.ndarray:
    """Poisson point process sample: exact count, uniform placement.

    Returns an (n, dim) array of atom positions.
    """
    if intensity < 0:
        raise ParameterError(f"PPP intensity must be >= 0, got {intensity}")
    n = stream.poisson(intensity * box.volume)
    lo = np.asarray(box.lo)
    span = box.side_lengths()
    if n == 0:
        return np.empty((0, box.dim))
    u = stream.uniform(n * box.dim).reshape(n, box.dim)
    return lo + u * span
