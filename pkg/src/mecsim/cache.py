"""Per-server cache state, proactive placement and lookup."""
from __future__ import annotations

import enum
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .workload import PopularityProfile, VideoCatalog, uniform_variant_dist


def video_size(bitrate: float, duration: float) -> float:
    """Size in bits of a stream at ``bitrate`` Mbps lasting ``duration`` seconds."""
    if not bitrate > 0 or not duration > 0:
        raise ValueError("bitrate and duration must be positive")
    return bitrate * 1e6 * duration


def variant_sizes(catalog: VideoCatalog) -> np.ndarray:
    return np.array([video_size(catalog.bitrate(q), catalog.duration) for q in range(catalog.n_variants)])


def library_size(catalog: VideoCatalog) -> float:
    """Bits needed to store every requestable variant of every video (original excluded)."""
    return float(catalog.n_videos * sum(variant_sizes(catalog)))


@dataclass(frozen=True)
class CacheEntry:
    video_id: int
    variant_idx: int
    size: float


@dataclass
class CacheState:
    """Cache of one MEC server.

    ``entries`` is kept in recency order, least recently used first; only the
    optional reactive mode ever evicts.
    """

    capacity: float
    entries: OrderedDict = field(default_factory=OrderedDict)
    used: float = 0.0

    def __contains__(self, key: tuple[int, int]) -> bool:
        return key in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def fits(self, size: float) -> bool:
        return self.used + size <= self.capacity

    def add(self, entry: CacheEntry) -> None:
        key = (entry.video_id, entry.variant_idx)
        if key in self.entries:
            raise ValueError(f"duplicate cache entry {key}")
        if not self.fits(entry.size):
            raise ValueError("entry does not fit")
        self.entries[key] = entry
        self.used += entry.size

    def touch(self, key: tuple[int, int]) -> None:
        self.entries.move_to_end(key)

    def evict_lru(self) -> CacheEntry:
        _, entry = self.entries.popitem(last=False)
        self.used -= entry.size
        if not self.entries:
            self.used = 0.0
        return entry

    def insert_lru(self, entry: CacheEntry) -> bool:
        """Insert as most recent, evicting least recent entries to make room."""
        if entry.size > self.capacity:
            return False
        while not self.fits(entry.size):
            self.evict_lru()
        self.add(entry)
        return True

    def variants_of(self, video_id: int) -> list[int]:
        return sorted(q for (v, q) in self.entries if v == video_id)


class LookupKind(enum.Enum):
    LOCAL_EXACT = "local-exact"
    LOCAL_HIGHER = "local-higher"
    MISS = "miss"


@dataclass(frozen=True)
class LookupOutcome:
    kind: LookupKind
    variant: int | None = None


def lookup(state: CacheState, video_id: int, variant_idx: int) -> LookupOutcome:
    """Exact hit, else the cheapest cached variant that can be transcoded down to the request.

    Variant indices run from highest to lowest bitrate, so "strictly higher
    bitrate" means a strictly smaller index.
    """
    if (video_id, variant_idx) in state.entries:
        return LookupOutcome(LookupKind.LOCAL_EXACT, variant_idx)
    for q in range(variant_idx - 1, -1, -1):
        if (video_id, q) in state.entries:
            return LookupOutcome(LookupKind.LOCAL_HIGHER, q)
    return LookupOutcome(LookupKind.MISS)


def placement_order(
    profile: PopularityProfile,
    catalog: VideoCatalog,
    bs: int,
    with_processing: bool,
    variant_dist: Sequence[float] | None = None,
) -> list[tuple[int, int]]:
    """(video, variant) pairs of BS ``bs`` in the order the greedy fill considers them.

    Without processing: all pairs by joint request probability, descending.
    With processing: the top variant of every video by local popularity first
    (it can be transcoded to every other variant), then the remaining pairs by
    joint probability.
    """
    vdist = uniform_variant_dist(catalog.n_variants) if variant_dist is None else np.asarray(variant_dist, float)
    pmf = profile.pmf(bs)
    n_v, n_q = catalog.n_videos, catalog.n_variants

    videos = np.repeat(np.arange(n_v), n_q)
    variants = np.tile(np.arange(n_q), n_v)
    joint = pmf[videos] * vdist[variants]
    if with_processing:
        tops = [(int(v), 0) for v in np.lexsort((np.arange(n_v), -pmf))]
        rest = variants > 0
        videos, variants, joint = videos[rest], variants[rest], joint[rest]
    else:
        tops = []
    # ties: ascending video id, then descending bitrate (= ascending index)
    idx = np.lexsort((variants, videos, -joint))
    return tops + [(int(videos[i]), int(variants[i])) for i in idx]


def plan_placement(
    profile: PopularityProfile,
    catalog: VideoCatalog,
    capacity: float,
    with_processing: bool,
    variant_dist: Sequence[float] | None = None,
) -> list[CacheState]:
    """Greedy proactive fill of every BS cache, stopping at the first item that does not fit."""
    if capacity < 0:
        raise ValueError("cache capacity must be non-negative")
    sizes = variant_sizes(catalog)
    states = []
    for b in range(profile.n_bs):
        placed = []
        used = 0.0
        for v, q in placement_order(profile, catalog, b, with_processing, variant_dist):
            if used + sizes[q] > capacity:
                break
            placed.append(CacheEntry(v, q, float(sizes[q])))
            used += sizes[q]
        state = CacheState(capacity=float(capacity))
        # least popular first so reactive LRU eviction starts from the tail
        for entry in reversed(placed):
            state.add(entry)
        states.append(state)
    return states


def placement_arrays(states: Sequence[CacheState], catalog: VideoCatalog) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dense view of placed caches for the replay kernel.

    Returns ``(cached, last_used, used)``: a boolean presence cube indexed
    ``[bs, video, variant]``, recency ticks consistent with each state's LRU
    order, and bits used per BS.
    """
    n_bs = len(states)
    cached = np.zeros((n_bs, catalog.n_videos, catalog.n_variants), dtype=np.bool_)
    last_used = np.zeros((n_bs, catalog.n_videos, catalog.n_variants), dtype=np.int64)
    used = np.zeros(n_bs)
    for b, state in enumerate(states):
        for tick, (v, q) in enumerate(state.entries, start=1):
            cached[b, v, q] = True
            last_used[b, v, q] = tick
        used[b] = state.used
    return cached, last_used, used
