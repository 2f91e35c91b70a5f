"""Cache policies: the noisy perturbed-leader family plus LFU and LRU.

The perturbed-leader policy keeps approximate request counts (only
requests with both the observation bit and its own sampling bit set are
counted) and stores the C files with the largest perturbed counts
``counts + gamma``. The cache is recomputed only at batch boundaries,
and only when the batch contributed at least one counted request. The
three noise couplings share that skeleton:

* ``static``  - gamma stays at its initial draw; the top-C view is
  maintained incrementally through a heap.
* ``dynamic`` - gamma is redrawn i.i.d. at every refresh; the top-C is
  recomputed by a full sort.
* ``lazy``    - gamma is the unique value in [0, eta) that keeps
  ``counts + gamma`` on the grid ``gamma0 + eta * Z``; the perturbed
  count of a file moves only when its count crosses a grid line, so
  most refreshes touch nothing.

Every argmax breaks ties toward the lower file id.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import replace
from heapq import heapify, heappop, heappush
from typing import NamedTuple

import numpy as np

from .core import Catalog, PolicyConfig, RngStream
from .topk import TopCTracker

POLICY_NAMES = ("s-nfpl", "d-nfpl", "l-nfpl", "nfpl", "fpl", "lfu", "lru")


class PolicyStep(NamedTuple):
    """Outcome of feeding one request to a policy."""

    request: int
    observed: bool
    hit: bool
    cache_after: object  # live view of the cache; copy before mutating anything


class NfplPolicy:
    """Noisy perturbed-leader caching over a fixed horizon.

    ``gamma0`` and ``beta`` are test hooks that bypass the stream draws:
    ``gamma0`` injects the initial noise vector, ``beta`` a full per-step
    sampling schedule. ``ignore_mask`` makes the policy count every
    request regardless of the observation bit (full-observation mode).
    """

    def __init__(
        self,
        config: PolicyConfig,
        catalog: Catalog,
        horizon: int,
        rng: RngStream,
        *,
        gamma0=None,
        beta=None,
        ignore_mask: bool = False,
    ):
        n = catalog.n_files
        if config.cache_capacity >= n:
            raise ValueError(
                f"cache capacity {config.cache_capacity} must be below "
                f"catalog size {n}"
            )
        if horizon < 1:
            raise ValueError("horizon must be positive")
        self.config = config
        self.n_files = n
        self.horizon = horizon
        self.eta = config.eta
        self._rng = rng
        self._ignore_mask = ignore_mask
        self._batch = config.batch_size
        self._mode = config.noise_mode

        if gamma0 is None:
            gamma0 = rng.uniform(0.0, self.eta, n)
        gamma0 = np.asarray(gamma0, dtype=float)
        if gamma0.shape != (n,):
            raise ValueError(f"gamma0 must have one entry per file, got {gamma0.shape}")
        if gamma0.min() < 0.0 or gamma0.max() >= self.eta:
            raise ValueError("gamma0 entries must lie in [0, eta)")
        self.gamma0 = gamma0

        # Sampling bits live on their own substream, drawn in constant-size
        # chunks (or per batch in fixed mode), so policy state stays O(N+C)
        # whatever the horizon.
        self._beta_rng = rng.substream(1)
        self._beta_override = None
        self._always_sample = False
        self._beta_buf: list[bool] = []
        self._beta_pos = 0
        self._batch_bits: list[bool] = []
        self._drawn_batch = -1
        if beta is not None:
            beta = np.asarray(beta, dtype=bool)
            if beta.shape != (horizon,):
                raise ValueError("beta schedule must cover the whole horizon")
            self._beta_override = beta.tolist()
        elif config.sampling == "fixed":
            if config.fixed_per_batch == config.batch_size:
                self._always_sample = True
        elif config.sample_prob >= 1.0:
            self._always_sample = True

        self.counts = np.zeros(n, dtype=np.int64)
        self.gamma = gamma0.copy()
        self.flag = False
        self.cache_refreshes = 0
        self.sampled_steps = 0
        self.score_changes = 0
        self._t = 0
        self._dirty: set[int] = set()
        self._pending: list[tuple[int, int]] = []

        if self._mode == "dynamic":
            self.tracker = None
            order = np.argsort(-gamma0, kind="stable")[: config.cache_capacity]
            self.cache = set(order.tolist())
        else:
            self.tracker = TopCTracker(gamma0.tolist(), config.cache_capacity)
            self.cache = self.tracker.members()

    def _beta_at(self, t: int) -> bool:
        if self._always_sample:
            return True
        if self._beta_override is not None:
            return self._beta_override[t - 1]
        cfg = self.config
        if cfg.sampling == "fixed":
            # exactly b of each batch's positions, uniform without
            # replacement (a trailing partial batch is truncated)
            batch_idx = (t - 1) // cfg.batch_size
            if batch_idx != self._drawn_batch:
                bits = [False] * cfg.batch_size
                for pos in self._beta_rng.permutation(cfg.batch_size)[: cfg.fixed_per_batch]:
                    bits[pos] = True
                self._batch_bits = bits
                self._drawn_batch = batch_idx
            return self._batch_bits[(t - 1) % cfg.batch_size]
        if self._beta_pos >= len(self._beta_buf):
            self._beta_buf = self._beta_rng.bernoulli(cfg.sample_prob, 8192).tolist()
            self._beta_pos = 0
        bit = self._beta_buf[self._beta_pos]
        self._beta_pos += 1
        return bit

    @property
    def heap_ops(self) -> int:
        return self.tracker.op_counter if self.tracker is not None else 0

    def step(self, t: int, request: int, observed: bool) -> PolicyStep:
        if t != self._t + 1:
            raise ValueError(f"steps must arrive in order: expected t={self._t + 1}, got {t}")
        if t > self.horizon:
            raise ValueError(f"t={t} beyond horizon {self.horizon}")
        self._t = t
        hit = request in self.cache
        if (observed or self._ignore_mask) and self._beta_at(t):
            self.counts[request] += 1
            self.sampled_steps += 1
            self.flag = True
            if self._mode == "static":
                swap = self.tracker.bump(request, self.tracker.scores[request] + 1.0)
                self.score_changes += 1
                if swap[0] is not None:
                    self._pending.append(swap)
            elif self._mode == "lazy":
                self._dirty.add(request)
        if self.flag and t % self._batch == 0:
            self._refresh()
            self.flag = False
            self.cache_refreshes += 1
        return PolicyStep(request, observed, hit, self.cache)

    def _refresh(self) -> None:
        if self._mode == "dynamic":
            gamma = self._rng.uniform(0.0, self.eta, self.n_files)
            self.gamma = gamma
            perturbed = self.counts + gamma
            order = np.argsort(-perturbed, kind="stable")[: self.config.cache_capacity]
            self.cache = set(order.tolist())
            return
        if self._mode == "lazy":
            eta = self.eta
            tracker = self.tracker
            for f in self._dirty:
                g0 = self.gamma0[f]
                c = int(self.counts[f])
                new_score = g0 + eta * math.ceil((c - g0) / eta)
                if new_score > tracker.scores[f]:
                    self.score_changes += 1
                    swap = tracker.bump(f, new_score)
                    if swap[0] is not None:
                        self._pending.append(swap)
                self.gamma[f] = new_score - c
            self._dirty.clear()
        # static and lazy: fold membership changes into the decision set
        if self._pending:
            cache = self.cache
            for evicted, admitted in self._pending:
                cache.discard(evicted)
                cache.add(admitted)
            self._pending.clear()


class LfuPolicy:
    """Evict-least-frequent under partial observation.

    Counts use observed requests only. On an observed miss the requested
    file displaces the least-frequent cached file (ties evicting the
    higher id). With ``admission_threshold`` set, the swap happens only
    when the candidate's count strictly exceeds the smallest cached
    count, which protects established files on churning traces. Starts
    with files 0..C-1 cached.
    """

    heap_ops = 0
    cache_refreshes = 0
    score_changes = 0

    def __init__(
        self,
        cache_capacity: int,
        catalog: Catalog,
        admission_threshold: bool = False,
    ):
        if cache_capacity >= catalog.n_files:
            raise ValueError("cache capacity must be below catalog size")
        self.counts = [0] * catalog.n_files
        self.cache = set(range(cache_capacity))
        self.admission_threshold = admission_threshold
        self.sampled_steps = 0
        # entries (count, -id, id); stale entries are skipped lazily
        self._heap = [(0, -f, f) for f in range(cache_capacity)]
        heapify(self._heap)

    def _least_frequent(self) -> tuple[int, int]:
        heap = self._heap
        counts = self.counts
        cache = self.cache
        while True:
            cnt, _, f = heap[0]
            if f in cache and counts[f] == cnt:
                return cnt, f
            heappop(heap)

    def step(self, t: int, request: int, observed: bool) -> PolicyStep:
        cache = self.cache
        hit = request in cache
        if observed:
            self.sampled_steps += 1
            c = self.counts[request] + 1
            self.counts[request] = c
            if hit:
                heappush(self._heap, (c, -request, request))
            else:
                min_count, victim = self._least_frequent()
                if not self.admission_threshold or c > min_count:
                    heappop(self._heap)
                    cache.remove(victim)
                    cache.add(request)
                    heappush(self._heap, (c, -request, request))
        return PolicyStep(request, observed, hit, cache)


class LruPolicy:
    """Evict-least-recently-used; recency moves on observed requests only."""

    heap_ops = 0
    cache_refreshes = 0
    score_changes = 0

    def __init__(self, cache_capacity: int, catalog: Catalog):
        if cache_capacity >= catalog.n_files:
            raise ValueError("cache capacity must be below catalog size")
        self._recency = OrderedDict((f, None) for f in range(cache_capacity))
        self.sampled_steps = 0

    @property
    def cache(self):
        return self._recency.keys()

    def step(self, t: int, request: int, observed: bool) -> PolicyStep:
        recency = self._recency
        hit = request in recency
        if observed:
            self.sampled_steps += 1
            if hit:
                recency.move_to_end(request)
            else:
                recency.popitem(last=False)
                recency[request] = None
        return PolicyStep(request, observed, hit, recency.keys())


def make_policy(
    name: str,
    config: PolicyConfig,
    catalog: Catalog,
    horizon: int,
    rng: RngStream,
    **hooks,
):
    """Build a policy instance from its CLI name."""
    if name == "lfu":
        return LfuPolicy(config.cache_capacity, catalog)
    if name == "lru":
        return LruPolicy(config.cache_capacity, catalog)
    if name == "nfpl":
        return NfplPolicy(config, catalog, horizon, rng, **hooks)
    if name == "fpl":
        cfg = replace(config, noise_mode="static")
        return NfplPolicy(cfg, catalog, horizon, rng, ignore_mask=True, **hooks)
    mode = {"s-nfpl": "static", "d-nfpl": "dynamic", "l-nfpl": "lazy"}.get(name)
    if mode is None:
        raise ValueError(f"unknown policy {name!r}; valid names: {', '.join(POLICY_NAMES)}")
    return NfplPolicy(replace(config, noise_mode=mode), catalog, horizon, rng, **hooks)
