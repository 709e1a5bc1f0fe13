"""The four request-service policies and per-request bit accounting."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cache import CacheState, LookupKind, lookup, variant_sizes
from .transcode import Placement, Processor, TranscodeJob, job_load, pick_transcoder
from .workload import Request, VideoCatalog


class StrategyKind(enum.Enum):
    PRO_CACHE = "pro-cache"
    CO_CACHE = "co-cache"
    PRO_COCACHE = "pro-cocache"
    COPRO_COCACHE = "copro-cocache"

    @property
    def processing(self) -> bool:
        return self is not StrategyKind.CO_CACHE

    @property
    def collaborative(self) -> bool:
        return self is not StrategyKind.PRO_CACHE

    @property
    def code(self) -> int:
        return _STRATEGY_CODES[self]

    @classmethod
    def parse(cls, token: str) -> "StrategyKind":
        try:
            return cls(token)
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown strategy {token!r} (expected one of {valid})") from None


_STRATEGY_CODES = {s: i for i, s in enumerate(StrategyKind)}
ALL_STRATEGIES = tuple(StrategyKind)


class Source(enum.IntEnum):
    LOCAL_HIT = 0
    LOCAL_TRANSCODE = 1
    NEIGHBOR_HIT = 2
    NEIGHBOR_TRANSCODE_AT_PROVIDER = 3
    NEIGHBOR_FETCH_TRANSCODE_AT_DELIVERY = 4
    ORIGIN_FETCH = 5

    @property
    def uses_neighbor(self) -> bool:
        return self in (Source.NEIGHBOR_HIT, Source.NEIGHBOR_TRANSCODE_AT_PROVIDER,
                        Source.NEIGHBOR_FETCH_TRANSCODE_AT_DELIVERY)

    @property
    def transcodes(self) -> bool:
        return self in (Source.LOCAL_TRANSCODE, Source.NEIGHBOR_TRANSCODE_AT_PROVIDER,
                        Source.NEIGHBOR_FETCH_TRANSCODE_AT_DELIVERY)


@dataclass(frozen=True)
class ServiceDecision:
    source: Source
    requested_bits: float
    origin_bits: float = 0.0
    inter_bs_bits: float = 0.0
    neighbor: int | None = None
    transcode: TranscodeJob | None = None


@dataclass
class Metrics:
    """Totals over the counted part of a run (arrivals at or after ``warmup``)."""

    horizon: float
    warmup: float = 0.0
    processing_capacity: float = 0.0
    demand_bits: float = 0.0
    backhaul_bits: float = 0.0
    inter_bs_bits: float = 0.0
    counts: np.ndarray = field(default_factory=lambda: np.zeros(len(Source), dtype=np.int64))
    busy: np.ndarray = field(default_factory=lambda: np.zeros(0))
    admitted: int = 0
    released: int = 0
    arrivals: int = 0

    @property
    def n_requests(self) -> int:
        return int(self.counts.sum())

    def count(self, source: Source) -> int:
        return int(self.counts[source])

    def local_hit_rate(self) -> float:
        n = self.n_requests
        return self.count(Source.LOCAL_HIT) / n if n else 0.0

    def processing_utilization(self) -> float:
        """Mean over servers of busy Mbps-seconds / (capacity x measured window)."""
        window = self.horizon - self.warmup
        if len(self.busy) == 0 or window <= 0 or self.processing_capacity <= 0:
            return 0.0
        return float(np.mean(self.busy) / (self.processing_capacity * window))


def serve_request(
    strategy: StrategyKind,
    request: Request,
    caches: Sequence[CacheState],
    processors: Sequence[Processor],
    now: float,
    catalog: VideoCatalog,
    costing: str = "input",
) -> ServiceDecision:
    """Walk the strategy's ordered rule list; the first rule that applies decides.

    Admission is only checked here (``Processor.fits``); the caller commits
    the returned transcode job.
    """
    b, v, q = request.bs_id, request.video_id, request.variant_idx
    sizes = variant_sizes(catalog)
    want = float(sizes[q])

    def job(src: int, host: int) -> TranscodeJob:
        return TranscodeJob(v, src, q, job_load(catalog, src, q, costing), now, now + catalog.duration, host)

    local = lookup(caches[b], v, q)
    if local.kind is LookupKind.LOCAL_EXACT:
        return ServiceDecision(Source.LOCAL_HIT, want)
    if strategy.processing and local.kind is LookupKind.LOCAL_HIGHER:
        j = job(local.variant, b)
        if processors[b].fits(j.load):
            return ServiceDecision(Source.LOCAL_TRANSCODE, want, transcode=j)

    if strategy.collaborative:
        neighbors = [n for n in range(len(caches)) if n != b]
        for n in neighbors:
            if (v, q) in caches[n]:
                return ServiceDecision(Source.NEIGHBOR_HIT, want, inter_bs_bits=want, neighbor=n)
        if strategy.processing:
            for n in neighbors:
                found = lookup(caches[n], v, q)
                if found.kind is LookupKind.LOCAL_HIGHER:
                    src = found.variant
                    at_delivery = ServiceDecision(
                        Source.NEIGHBOR_FETCH_TRANSCODE_AT_DELIVERY, want,
                        inter_bs_bits=float(sizes[src]), neighbor=n, transcode=job(src, b))
                    if strategy is StrategyKind.PRO_COCACHE:
                        if processors[b].fits(at_delivery.transcode.load):
                            return at_delivery
                        break
                    at_provider = ServiceDecision(
                        Source.NEIGHBOR_TRANSCODE_AT_PROVIDER, want,
                        inter_bs_bits=want, neighbor=n, transcode=job(src, n))
                    first = pick_transcoder(processors[n].in_use, processors[b].in_use)
                    ordered = (at_provider, at_delivery) if first is Placement.PROVIDER else (at_delivery, at_provider)
                    for option in ordered:
                        if processors[option.transcode.host].fits(option.transcode.load):
                            return option
                    break

    return ServiceDecision(Source.ORIGIN_FETCH, want, origin_bits=want)


def account(decision: ServiceDecision, metrics: Metrics) -> Metrics:
    metrics.demand_bits += decision.requested_bits
    metrics.backhaul_bits += decision.origin_bits
    metrics.inter_bs_bits += decision.inter_bs_bits
    metrics.counts[decision.source] += 1
    return metrics
