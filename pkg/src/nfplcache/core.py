"""Shared domain types and the deterministic random-number contract.

Randomness is organized as named substreams of a single 64-bit seed, so
that any simulation is a pure function of its configuration. Substreams
are built on numpy's PCG64 through ``SeedSequence(seed, spawn_key=...)``,
which guarantees bit-identical draws across platforms and statistically
independent streams for distinct stream ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Fixed stream ids: the observation mask, policy-internal randomness, and
# synthetic trace generation never share a stream.
STREAM_BPO = 0
STREAM_POLICY = 1
STREAM_TRACE = 2

NOISE_MODES = ("static", "dynamic", "lazy")
SAMPLING_MODES = ("bernoulli", "fixed")


@dataclass(frozen=True)
class Catalog:
    """The set of cacheable files, identified by dense ids 0..n_files-1."""

    n_files: int

    def __post_init__(self) -> None:
        if self.n_files < 1:
            raise ValueError(f"catalog needs at least one file, got {self.n_files}")


@dataclass(eq=False)
class Trace:
    """An ordered request sequence over a catalog."""

    catalog: Catalog
    requests: np.ndarray  # int array, each entry in [0, n_files)

    def __post_init__(self) -> None:
        self.requests = np.asarray(self.requests, dtype=np.int64)
        if self.requests.ndim != 1 or len(self.requests) < 1:
            raise ValueError("trace must contain at least one request")
        lo = int(self.requests.min())
        hi = int(self.requests.max())
        if lo < 0 or hi >= self.catalog.n_files:
            raise ValueError(
                f"request ids must lie in [0, {self.catalog.n_files}), "
                f"saw range [{lo}, {hi}]"
            )

    def __len__(self) -> int:
        return len(self.requests)


@dataclass(frozen=True)
class CacheState:
    """An immutable snapshot of the stored file set."""

    stored: frozenset[int]

    def __contains__(self, file_id: int) -> bool:
        return file_id in self.stored

    def __len__(self) -> int:
        return len(self.stored)


@dataclass(frozen=True)
class PolicyConfig:
    """All tunables for one policy instance.

    ``eta`` is stored, not recomputed per step; use :func:`default_eta`
    to fill it from the horizon. ``fixed_per_batch`` switches request
    sampling from i.i.d. Bernoulli(q) to exactly-b-per-batch.
    """

    cache_capacity: int
    batch_size: int = 1
    observe_prob: float = 1.0
    sample_prob: float = 1.0
    eta: float = 1.0
    noise_mode: str = "static"
    sampling: str = "bernoulli"
    fixed_per_batch: int | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.cache_capacity < 1:
            raise ValueError("cache_capacity must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not 0.0 < self.observe_prob <= 1.0:
            raise ValueError("observe_prob must lie in (0, 1]")
        if not 0.0 < self.sample_prob <= 1.0:
            raise ValueError("sample_prob must lie in (0, 1]")
        if not self.eta > 0.0:
            raise ValueError("eta must be positive")
        if self.noise_mode not in NOISE_MODES:
            raise ValueError(f"noise_mode must be one of {NOISE_MODES}")
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"sampling must be one of {SAMPLING_MODES}")
        if self.sampling == "fixed":
            b = self.fixed_per_batch
            if b is None or not 1 <= b <= self.batch_size:
                raise ValueError(
                    "fixed sampling needs 1 <= fixed_per_batch <= batch_size"
                )


def default_eta(
    batch_size: int,
    cache_capacity: int,
    horizon: int,
    observe_prob: float = 1.0,
    kind: str = "theoretical",
) -> float:
    """Noise magnitude for a given horizon.

    ``theoretical`` returns sqrt(B*T / 2C); ``experimental`` scales it by
    the observation probability p.
    """
    if batch_size < 1 or cache_capacity < 1 or horizon < 1:
        raise ValueError("batch_size, cache_capacity and horizon must be positive")
    eta = math.sqrt(batch_size * horizon / (2.0 * cache_capacity))
    if kind == "theoretical":
        return eta
    if kind == "experimental":
        if not 0.0 < observe_prob <= 1.0:
            raise ValueError("observe_prob must lie in (0, 1]")
        return observe_prob * eta
    raise ValueError("kind must be 'theoretical' or 'experimental'")


@dataclass(eq=False)
class RngStream:
    """A named, reproducible substream of a master seed.

    Same (seed, stream_id) always yields the same draw sequence; clones
    restart the sequence from the beginning.
    """

    seed: int
    stream_id: int
    _gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def clone(self) -> "RngStream":
        return RngStream(self.seed, self.stream_id)

    def substream(self, key: int) -> "RngStream":
        """Derive an independent stream keyed under this one."""
        child = object.__new__(RngStream)
        child.seed = self.seed
        child.stream_id = self.stream_id
        ss = np.random.SeedSequence(
            entropy=self.seed, spawn_key=(self.stream_id, key)
        )
        child._gen = np.random.Generator(np.random.PCG64(ss))
        return child

    # Draw helpers: thin wrappers so policies never touch the generator.
    def random(self, size: int | None = None):
        return self._gen.random(size)

    def uniform(self, low: float, high: float, size: int | None = None):
        return self._gen.uniform(low, high, size)

    def bernoulli(self, p: float, size: int) -> np.ndarray:
        if not 0.0 <= p <= 1.0:
            raise ValueError("p must lie in [0, 1]")
        if p >= 1.0:
            return np.ones(size, dtype=bool)
        if p <= 0.0:
            return np.zeros(size, dtype=bool)
        return self._gen.random(size) < p

    def integers(self, low: int, high: int, size: int | None = None):
        return self._gen.integers(low, high, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def multinomial(self, n: int, pvals: np.ndarray) -> np.ndarray:
        return self._gen.multinomial(n, pvals)


def spawn_stream(seed: int, stream_id: int) -> RngStream:
    """Deterministic substream: repeated calls return identical streams."""
    return RngStream(seed, stream_id)
