"""Video catalog, per-BS Zipf popularity and Poisson request traces."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DEFAULT_RATIOS = (0.82, 0.67, 0.55, 0.45)

# Stream tags mixed into the root seed. Each (tag, index) pair owns an
# independent generator, so adding a BS never perturbs another BS's stream.
_POPULARITY_STREAM = 1
_TRACE_STREAM = 2


def stream_rng(seed: int, tag: int, index: int) -> np.random.Generator:
    """Generator for sub-stream ``index`` of kind ``tag`` under root ``seed``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tag), int(index)]))


@dataclass(frozen=True)
class VideoCatalog:
    n_videos: int = 1000
    original_bitrate: float = 2.0  # Mbps
    duration: float = 600.0  # seconds
    variant_ratios: tuple[float, ...] = DEFAULT_RATIOS

    def __post_init__(self):
        if self.n_videos < 1:
            raise ValueError("n_videos must be >= 1")
        if not self.original_bitrate > 0:
            raise ValueError("original_bitrate must be positive")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        ratios = tuple(float(r) for r in self.variant_ratios)
        object.__setattr__(self, "variant_ratios", ratios)
        for r in ratios:
            if not 0.0 < r <= 1.0:
                raise ValueError(f"variant ratio {r} outside (0, 1]")
        if any(a <= b for a, b in zip(ratios, ratios[1:])):
            raise ValueError("variant_ratios must be strictly decreasing")

    @property
    def n_variants(self) -> int:
        return len(self.variant_ratios)

    def bitrate(self, q: int) -> float:
        """Bitrate in Mbps of variant ``q``."""
        return self.original_bitrate * self.variant_ratios[q]

    def bitrates(self) -> np.ndarray:
        return np.array([self.bitrate(q) for q in range(self.n_variants)], dtype=np.float64)


@dataclass(frozen=True)
class PopularityProfile:
    """Per-BS popularity: ``per_bs_rank[b, v]`` is the 0-based rank of video v at BS b."""

    alpha: float
    per_bs_rank: np.ndarray = field(repr=False)

    @property
    def n_bs(self) -> int:
        return self.per_bs_rank.shape[0]

    @property
    def n_videos(self) -> int:
        return self.per_bs_rank.shape[1]

    def order(self, bs: int) -> np.ndarray:
        """Video ids of BS ``bs`` from most to least popular."""
        return np.argsort(self.per_bs_rank[bs], kind="stable")

    def pmf(self, bs: int) -> np.ndarray:
        """Request probability indexed by video id."""
        return zipf_pmf(self.n_videos, self.alpha)[self.per_bs_rank[bs]]


@dataclass(frozen=True)
class Request:
    arrival_time: float
    bs_id: int
    video_id: int
    variant_idx: int


@dataclass(frozen=True)
class RequestTrace:
    """Time-ordered requests stored column-wise."""

    times: np.ndarray
    bs: np.ndarray
    video: np.ndarray
    variant: np.ndarray
    horizon: float
    seed: int

    def __len__(self) -> int:
        return len(self.times)

    @property
    def requests(self) -> list[Request]:
        return [
            Request(float(t), int(b), int(v), int(q))
            for t, b, v, q in zip(self.times, self.bs, self.video, self.variant)
        ]

    def tobytes(self) -> bytes:
        return b"".join(a.tobytes() for a in (self.times, self.bs, self.video, self.variant))

    @classmethod
    def from_requests(cls, requests: Sequence[Request], horizon: float, seed: int = 0) -> "RequestTrace":
        reqs = sorted(requests, key=lambda r: r.arrival_time)
        return cls(
            times=np.array([r.arrival_time for r in reqs], dtype=np.float64),
            bs=np.array([r.bs_id for r in reqs], dtype=np.int64),
            video=np.array([r.video_id for r in reqs], dtype=np.int64),
            variant=np.array([r.variant_idx for r in reqs], dtype=np.int64),
            horizon=float(horizon),
            seed=seed,
        )


def zipf_pmf(n: int, alpha: float) -> np.ndarray:
    """Rank-indexed Zipf probabilities ``p[i] ~ (i+1)**-alpha``, normalized by direct summation."""
    if n < 1:
        raise ValueError("zipf_pmf needs n >= 1")
    if alpha < 0:
        raise ValueError("zipf exponent must be non-negative")
    weights = np.arange(1, n + 1, dtype=np.float64) ** (-float(alpha))
    return weights / np.sum(weights)


def uniform_variant_dist(n_variants: int) -> np.ndarray:
    return np.full(n_variants, 1.0 / n_variants)


def shuffle_popularity(n_videos: int, n_bs: int, seed: int, alpha: float = 0.8) -> PopularityProfile:
    """Independent full permutation of the popularity ranking at every BS."""
    if n_videos < 1 or n_bs < 1:
        raise ValueError("counts must be >= 1")
    ranks = np.empty((n_bs, n_videos), dtype=np.int64)
    for b in range(n_bs):
        order = stream_rng(seed, _POPULARITY_STREAM, b).permutation(n_videos)
        ranks[b, order] = np.arange(n_videos)
    return PopularityProfile(alpha=float(alpha), per_bs_rank=ranks)


def _poisson_arrivals(rng: np.random.Generator, mean_gap: float, horizon: float) -> np.ndarray:
    expected = horizon / mean_gap
    chunk = int(expected + 6.0 * np.sqrt(expected) + 16)
    times = np.cumsum(rng.exponential(mean_gap, size=chunk))
    while times[-1] <= horizon:
        more = np.cumsum(rng.exponential(mean_gap, size=chunk)) + times[-1]
        times = np.concatenate([times, more])
    return times[times <= horizon]


def generate_trace(
    profile: PopularityProfile,
    catalog: VideoCatalog,
    rate: float,
    horizon: float,
    variant_dist: Sequence[float] | None = None,
    seed: int = 0,
) -> RequestTrace:
    """Poisson request trace; ``rate`` is requests per BS per minute."""
    if rate < 0:
        raise ValueError("arrival rate must be non-negative")
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    if profile.n_videos != catalog.n_videos:
        raise ValueError("profile and catalog disagree on the number of videos")
    if variant_dist is None:
        vdist = uniform_variant_dist(catalog.n_variants)
    else:
        vdist = np.asarray(variant_dist, dtype=np.float64)
        if len(vdist) != catalog.n_variants or np.any(vdist < 0) or abs(vdist.sum() - 1.0) > 1e-9:
            raise ValueError("variant_dist must be a distribution over the catalog variants")

    empty_i = np.empty(0, dtype=np.int64)
    if rate == 0 or horizon == 0:
        return RequestTrace(np.empty(0), empty_i, empty_i.copy(), empty_i.copy(), float(horizon), seed)

    rank_pmf = zipf_pmf(catalog.n_videos, profile.alpha)
    parts = []
    for b in range(profile.n_bs):
        rng = stream_rng(seed, _TRACE_STREAM, b)
        t = _poisson_arrivals(rng, 60.0 / rate, horizon)
        ranks = rng.choice(catalog.n_videos, size=len(t), p=rank_pmf)
        variants = rng.choice(catalog.n_variants, size=len(t), p=vdist)
        videos = profile.order(b)[ranks]
        parts.append((t, np.full(len(t), b, dtype=np.int64), videos.astype(np.int64), variants.astype(np.int64)))

    times = np.concatenate([p[0] for p in parts])
    bs = np.concatenate([p[1] for p in parts])
    idx = np.lexsort((bs, times))
    return RequestTrace(
        times=times[idx],
        bs=bs[idx],
        video=np.concatenate([p[2] for p in parts])[idx],
        variant=np.concatenate([p[3] for p in parts])[idx],
        horizon=float(horizon),
        seed=seed,
    )
