"""Discrete-event replay of a request trace against placed caches and processors.

``run`` drives a compiled kernel over column arrays. ``replay_reference``
replays the same trace through the object-level API (``serve_request``,
``Processor``, an explicit event heap); it exists to cross-check the kernel.
"""
from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from ._accel import kernel
from .cache import CacheEntry, CacheState, library_size, placement_arrays, plan_placement, variant_sizes
from .strategies import Metrics, Source, StrategyKind, account, serve_request
from .transcode import Processor, admit, job_load, release
from .workload import PopularityProfile, RequestTrace, VideoCatalog

RELEASE, ARRIVAL = 0, 1

_PRO_COCACHE = StrategyKind.PRO_COCACHE.code


class UndefinedMetricError(ValueError):
    pass


@dataclass(order=True)
class Event:
    """Heap item; at equal times releases sort before arrivals, then by sequence."""

    time: float
    kind: int
    seq: int
    payload: Any = field(compare=False, default=None)


@kernel
def _insert_lru(cached, last_used, used, n_entries, sizes, b, v, q, cache_cap, tick):
    size = sizes[q]
    if size > cache_cap:
        return
    n_v = cached.shape[1]
    n_q = cached.shape[2]
    while used[b] + size > cache_cap:
        best = -1
        bv = 0
        bq = 0
        for vv in range(n_v):
            for qq in range(n_q):
                if cached[b, vv, qq] and (best < 0 or last_used[b, vv, qq] < best):
                    best = last_used[b, vv, qq]
                    bv = vv
                    bq = qq
        cached[b, bv, bq] = False
        used[b] -= sizes[bq]
        n_entries[b] -= 1
        if n_entries[b] == 0:
            used[b] = 0.0
    cached[b, v, q] = True
    last_used[b, v, q] = tick
    used[b] += size
    n_entries[b] += 1


@kernel
def _replay(times, bs, video, variant, cached, last_used, used, n_entries, sizes, loads,
            strategy, processing, collaborative, proc_cap, duration, warmup, horizon,
            reactive, cache_cap, tick, counts, totals, busy, job_stats):
    n_bs = cached.shape[0]
    n_req = times.shape[0]
    in_use = np.zeros(n_bs)
    active = np.zeros(n_bs, dtype=np.int64)
    job_end = np.empty(n_req)
    job_host = np.empty(n_req, dtype=np.int64)
    job_load_mbps = np.empty(n_req)
    head = 0
    tail = 0
    for i in range(n_req):
        t = times[i]
        # every job lasts ``duration`` and jobs start in time order, so releases are FIFO
        while head < tail and job_end[head] <= t:
            h = job_host[head]
            in_use[h] -= job_load_mbps[head]
            active[h] -= 1
            if active[h] == 0:
                in_use[h] = 0.0
            head += 1
        b = bs[i]
        v = video[i]
        q = variant[i]
        code = -1
        host = -1
        src = -1
        inter = 0.0
        origin = 0.0
        if cached[b, v, q]:
            code = 0
        else:
            if processing:
                for qq in range(q - 1, -1, -1):
                    if cached[b, v, qq]:
                        if in_use[b] + loads[qq, q] <= proc_cap:
                            code = 1
                            host = b
                            src = qq
                        break
            if code < 0 and collaborative:
                for n in range(n_bs):
                    if n != b and cached[n, v, q]:
                        code = 2
                        inter = sizes[q]
                        break
                if code < 0 and processing:
                    provider = -1
                    for n in range(n_bs):
                        if n != b:
                            for qq in range(q - 1, -1, -1):
                                if cached[n, v, qq]:
                                    provider = n
                                    src = qq
                                    break
                            if provider >= 0:
                                break
                    if provider >= 0:
                        load = loads[src, q]
                        if strategy == _PRO_COCACHE:
                            if in_use[b] + load <= proc_cap:
                                code = 4
                                host = b
                                inter = sizes[src]
                        else:
                            provider_first = in_use[provider] < in_use[b]
                            for attempt in range(2):
                                at_provider = provider_first if attempt == 0 else not provider_first
                                node = provider if at_provider else b
                                if in_use[node] + load <= proc_cap:
                                    host = node
                                    if at_provider:
                                        code = 3
                                        inter = sizes[q]
                                    else:
                                        code = 4
                                        inter = sizes[src]
                                    break
            if code < 0:
                code = 5
                origin = sizes[q]
                src = -1

        if host >= 0:
            load = loads[src, q]
            in_use[host] += load
            active[host] += 1
            if in_use[host] > proc_cap:
                job_stats[2] += 1
            end = t + duration
            job_end[tail] = end
            job_host[tail] = host
            job_load_mbps[tail] = load
            tail += 1
            job_stats[0] += 1
            overlap = min(end, horizon) - max(t, warmup)
            if overlap > 0.0:
                busy[host] += load * overlap

        if t >= warmup:
            totals[0] += sizes[q]
            totals[1] += origin
            totals[2] += inter
            counts[code] += 1

        if reactive:
            tick += 1
            if code == 0:
                last_used[b, v, q] = tick
            else:
                if code == 1:
                    last_used[b, v, src] = tick
                    tick += 1
                _insert_lru(cached, last_used, used, n_entries, sizes, b, v, q, cache_cap, tick)
    job_stats[1] = tail
    return tick


def _loads_table(catalog: VideoCatalog, costing: str) -> np.ndarray:
    n = catalog.n_variants
    loads = np.zeros((n, n))
    for src in range(n):
        for dst in range(src + 1, n):
            loads[src, dst] = job_load(catalog, src, dst, costing)
    return loads


def run(
    catalog: VideoCatalog,
    profile: PopularityProfile,
    trace: RequestTrace,
    strategy: StrategyKind | str,
    cache_fraction: float,
    processing_capacity: float,
    *,
    variant_dist: Sequence[float] | None = None,
    warmup: float = 0.0,
    costing: str = "input",
    reactive: bool = False,
    python: bool = False,
) -> Metrics:
    """Place caches, replay ``trace`` under ``strategy`` and return the counted metrics.

    ``python=True`` runs the interpreted kernel even when numba is enabled.
    """
    strategy = StrategyKind.parse(strategy) if isinstance(strategy, str) else strategy
    cache_cap = cache_fraction * library_size(catalog)
    states = plan_placement(profile, catalog, cache_cap, strategy.processing, variant_dist)
    cached, last_used, used = placement_arrays(states, catalog)
    n_entries = np.array([len(s) for s in states], dtype=np.int64)
    counts = np.zeros(len(Source), dtype=np.int64)
    totals = np.zeros(3)
    busy = np.zeros(profile.n_bs)
    job_stats = np.zeros(3, dtype=np.int64)
    fn = _replay.py_func if python else _replay
    fn(
        trace.times, trace.bs, trace.video, trace.variant,
        cached, last_used, used, n_entries,
        variant_sizes(catalog), _loads_table(catalog, costing),
        strategy.code, strategy.processing, strategy.collaborative,
        float(processing_capacity), float(catalog.duration), float(warmup), float(trace.horizon),
        bool(reactive), float(cache_cap), np.int64(catalog.n_videos * catalog.n_variants + 1),
        counts, totals, busy, job_stats,
    )
    if job_stats[2]:
        raise AssertionError("processor capacity exceeded")
    return Metrics(
        horizon=float(trace.horizon), warmup=float(warmup), processing_capacity=float(processing_capacity),
        demand_bits=float(totals[0]), backhaul_bits=float(totals[1]), inter_bs_bits=float(totals[2]),
        counts=counts, busy=busy, admitted=int(job_stats[0]), released=int(job_stats[1]),
        arrivals=len(trace),
    )


def replay_reference(
    catalog: VideoCatalog,
    profile: PopularityProfile,
    trace: RequestTrace,
    strategy: StrategyKind | str,
    cache_fraction: float,
    processing_capacity: float,
    *,
    variant_dist: Sequence[float] | None = None,
    warmup: float = 0.0,
    costing: str = "input",
    reactive: bool = False,
    decisions: list | None = None,
) -> Metrics:
    """Object-level replay with an explicit event heap. Slow; used as an oracle."""
    strategy = StrategyKind.parse(strategy) if isinstance(strategy, str) else strategy
    cache_cap = cache_fraction * library_size(catalog)
    caches = plan_placement(profile, catalog, cache_cap, strategy.processing, variant_dist)
    procs = [Processor(processing_capacity, window_start=warmup, window_end=trace.horizon) for _ in caches]
    sizes = variant_sizes(catalog)
    metrics = Metrics(horizon=float(trace.horizon), warmup=float(warmup),
                      processing_capacity=float(processing_capacity))

    seq = itertools.count()
    events: list[Event] = []
    for req in trace.requests:
        heapq.heappush(events, Event(req.arrival_time, ARRIVAL, next(seq), req))

    last = 0.0
    while events:
        ev = heapq.heappop(events)
        last = ev.time
        if ev.kind == RELEASE:
            job = ev.payload
            release(procs[job.host], job.load, ev.time)
            metrics.released += 1
            continue
        req = ev.payload
        metrics.arrivals += 1
        decision = serve_request(strategy, req, caches, procs, ev.time, catalog, costing)
        if decisions is not None:
            decisions.append(decision)
        job = decision.transcode
        if job is not None:
            if not admit(procs[job.host], job.load, ev.time, catalog.duration):
                raise AssertionError("decision named a processor that cannot admit")
            if procs[job.host].in_use > procs[job.host].capacity:
                raise AssertionError("processor capacity exceeded")
            metrics.admitted += 1
            heapq.heappush(events, Event(job.end, RELEASE, next(seq), job))
        if req.arrival_time >= warmup:
            account(decision, metrics)
        if reactive:
            cache = caches[req.bs_id]
            key = (req.video_id, req.variant_idx)
            if decision.source is Source.LOCAL_HIT:
                cache.touch(key)
            else:
                if decision.source is Source.LOCAL_TRANSCODE:
                    cache.touch((req.video_id, job.from_variant))
                cache.insert_lru(CacheEntry(req.video_id, req.variant_idx, float(sizes[req.variant_idx])))

    for p in procs:
        p.advance(max(last, trace.horizon))
    metrics.busy = np.array([p.busy_integral for p in procs])
    return metrics


def backhaul_load(metrics: Metrics) -> float:
    """Origin-fetched bits as a fraction of demanded bits."""
    if not metrics.demand_bits > 0:
        raise UndefinedMetricError("backhaul load is undefined without demand")
    return metrics.backhaul_bits / metrics.demand_bits


def analytic_local_hit_rate(
    placement: Sequence[CacheState],
    profile: PopularityProfile,
    variant_dist: Sequence[float],
) -> np.ndarray:
    """Exact probability that a request at each BS is a local exact hit under static placement."""
    vdist = np.asarray(variant_dist, dtype=np.float64)
    rates = np.zeros(len(placement))
    for b, state in enumerate(placement):
        pmf = profile.pmf(b)
        rates[b] = sum(pmf[v] * vdist[q] for v, q in state.entries)
    return rates
