"""Makespan models for running an offloadable task batch locally, on a
mobile device cloud (MDC) with churn, or on one or more MEC servers."""
from __future__ import annotations

import enum
import heapq
import math
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

IMAGE_BITS = 481 * 321 * 24  # one 24-bit RGB image


class IncompleteExecutionError(RuntimeError):
    """Every MDC peer left before the batch finished and no host could take over."""


class NodeKind(enum.Enum):
    LOCAL_DEVICE = "local"
    PEER_DEVICE = "peer"
    EDGE_SERVER = "edge"


@dataclass(frozen=True)
class TaskBatch:
    n_tasks: int = 20
    input_bits_per_task: float = float(IMAGE_BITS)
    work_per_task: float = 30.0

    def __post_init__(self):
        if self.n_tasks < 1 or not self.input_bits_per_task > 0 or not self.work_per_task > 0:
            raise ValueError("task batch fields must be positive")


@dataclass(frozen=True)
class ResourceNode:
    kind: NodeKind
    speed: float  # work units per second
    link_rate: float = 0.0  # Mbps; 0 means no transfer (the task owner itself)
    availability: tuple[float, float] | None = None  # Normal(mean s, std s) presence time
    offload_overhead: float = 0.0  # seconds per task

    def __post_init__(self):
        if not self.speed > 0:
            raise ValueError("node speed must be positive")
        if self.link_rate < 0 or self.offload_overhead < 0:
            raise ValueError("link rate and overhead must be non-negative")
        if self.availability is not None and self.availability[1] < 0:
            raise ValueError("availability std must be non-negative")

    def transfer_time(self, batch: TaskBatch) -> float:
        return batch.input_bits_per_task / (self.link_rate * 1e6) if self.link_rate > 0 else 0.0

    def task_time(self, batch: TaskBatch) -> float:
        """Upload, then compute, then fixed overhead; no pipelining between tasks."""
        return self.transfer_time(batch) + batch.work_per_task / self.speed + self.offload_overhead


@dataclass(frozen=True)
class ExecutionReport:
    strategy: str
    makespan: float
    reassignments: float = 0
    k: int = 1


@dataclass(frozen=True)
class Inventory:
    local: ResourceNode
    peers: tuple[ResourceNode, ...]
    servers: tuple[ResourceNode, ...]


def estimate_local(batch: TaskBatch, device: ResourceNode) -> ExecutionReport:
    if device.kind is not NodeKind.LOCAL_DEVICE:
        raise ValueError("local execution needs a LOCAL_DEVICE node")
    return ExecutionReport("local", batch.n_tasks * batch.work_per_task / device.speed)


def draw_availability(peers: Sequence[ResourceNode], seed: int) -> np.ndarray:
    """Presence time of each peer, Normal(mean, std) truncated at zero.

    One standard normal per peer, so raising the mean with a fixed seed
    raises every peer's availability.
    """
    z = np.random.default_rng(seed).standard_normal(len(peers))
    out = np.full(len(peers), np.inf)
    for i, p in enumerate(peers):
        if p.availability is not None:
            mu, sigma = p.availability
            out[i] = max(0.0, mu + sigma * z[i])
    return out


def estimate_mdc(
    batch: TaskBatch,
    peers: Sequence[ResourceNode],
    seed: int,
    host: ResourceNode | None = None,
) -> ExecutionReport:
    """Round-robin the batch over peers that may leave mid-run.

    A task that would finish after its peer's departure is lost along with
    the rest of that peer's queue; lost tasks are dealt round-robin to the
    peers still present and restart from scratch, input transfer included.
    When no peer is left, the owning ``host`` device (if given) runs them;
    otherwise ``IncompleteExecutionError`` is raised.
    """
    if not peers:
        raise ValueError("MDC needs at least one peer")
    devices = list(peers) + ([host] if host is not None else [])
    avail = list(draw_availability(peers, seed)) + ([math.inf] if host is not None else [])
    host_idx = len(peers) if host is not None else -1
    tau = [d.task_time(batch) for d in devices]

    queues: list[deque] = [deque() for _ in devices]  # ready times of queued tasks
    for i in range(batch.n_tasks):
        queues[i % len(peers)].append(0.0)
    free_at = [0.0] * len(devices)
    pending = [False] * len(devices)
    departed = [False] * len(devices)
    events: list[tuple[float, int, int]] = []  # (time, 0=done/1=departure, device)

    def start(d: int) -> None:
        if pending[d] or not queues[d]:
            return
        begin = max(free_at[d], queues[d][0])
        end = begin + tau[d]
        pending[d] = True
        if end <= avail[d]:
            heapq.heappush(events, (end, 0, d))
        else:
            heapq.heappush(events, (max(avail[d], begin), 1, d))

    for d in range(len(devices)):
        start(d)

    done = 0
    makespan = 0.0
    reassigned = 0
    while events:
        t, kind, d = heapq.heappop(events)
        pending[d] = False
        if kind == 0:
            queues[d].popleft()
            free_at[d] = t
            done += 1
            makespan = max(makespan, t)
            start(d)
            continue
        departed[d] = True
        lost = len(queues[d])
        queues[d].clear()
        survivors = [e for e in range(len(peers)) if not departed[e] and avail[e] > t]
        if not survivors:
            if host_idx < 0:
                raise IncompleteExecutionError(f"all peers left with {batch.n_tasks - done} tasks unfinished")
            survivors = [host_idx]
        for j in range(lost):
            queues[survivors[j % len(survivors)]].append(t)
        reassigned += lost
        for e in survivors:
            start(e)

    if done != batch.n_tasks:  # pragma: no cover - guarded by the event loop
        raise IncompleteExecutionError(f"{batch.n_tasks - done} tasks unfinished")
    return ExecutionReport("mdc", makespan, reassigned)


def split_tasks(n_tasks: int, k: int) -> list[int]:
    """Even split; the remainder goes to the lowest-id servers."""
    base, rem = divmod(n_tasks, k)
    return [base + (1 if i < rem else 0) for i in range(k)]


def estimate_mec(batch: TaskBatch, servers: Sequence[ResourceNode], k: int) -> ExecutionReport:
    if not 1 <= k <= len(servers):
        raise ValueError(f"k must be in [1, {len(servers)}], got {k}")
    spans = []
    for server, n in zip(servers[:k], split_tasks(batch.n_tasks, k)):
        per_task = batch.work_per_task / server.speed + server.offload_overhead
        spans.append(n * batch.input_bits_per_task / (server.link_rate * 1e6) + n * per_task if n else 0.0)
    return ExecutionReport("mec" if k == 1 else "collab-mec", max(spans), 0, k)


def collab_gain(batch: TaskBatch, servers: Sequence[ResourceNode], k: int = 2) -> float:
    """Relative makespan reduction of ``k`` collaborating servers over the first server alone."""
    return 1.0 - estimate_mec(batch, servers, k).makespan / estimate_mec(batch, servers, 1).makespan


def calibrate_relay_overhead(
    batch: TaskBatch,
    servers: Sequence[ResourceNode],
    target: float = 0.40,
    tol: float = 1e-9,
) -> float:
    """Per-task overhead on the collaborating servers that makes ``collab_gain`` hit ``target``.

    The first server is the one the device talks to; tasks forwarded to the
    others pay the overhead. The gain falls monotonically as it grows, so
    bisection applies.
    """

    def gain(o: float) -> float:
        relayed = [servers[0]] + [replace(s, offload_overhead=o) for s in servers[1:]]
        return collab_gain(batch, relayed, len(servers))

    lo, hi = 0.0, 1.0
    if gain(lo) < target:
        raise ValueError(f"target gain {target} unreachable: zero-overhead gain is {gain(lo):.4f}")
    while gain(hi) > target:
        hi *= 2.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if gain(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def default_inventory(
    mu: float = 100.0,
    sigma: float = 5.0,
    link_mbps: float = 1.0,
    n_peers: int = 4,
    n_servers: int = 2,
    local_speed: float = 1.0,
    peer_speed: float = 1.0,
    server_speed: float = 8.0,
    relay_overhead: float | None = None,
    batch: TaskBatch | None = None,
    target_gain: float = 0.40,
) -> Inventory:
    """Phones for the device and peers, desktops for the MEC servers.

    With ``relay_overhead=None`` the collaborating servers' overhead is
    calibrated so two servers beat one by ``target_gain``.
    """
    local = ResourceNode(NodeKind.LOCAL_DEVICE, local_speed)
    peers = tuple(ResourceNode(NodeKind.PEER_DEVICE, peer_speed, link_mbps, (mu, sigma)) for _ in range(n_peers))
    servers = [ResourceNode(NodeKind.EDGE_SERVER, server_speed, link_mbps) for _ in range(n_servers)]
    if n_servers > 1:
        if relay_overhead is None:
            relay_overhead = calibrate_relay_overhead(batch or TaskBatch(), servers[:2], target_gain)
        servers = [servers[0]] + [replace(s, offload_overhead=relay_overhead) for s in servers[1:]]
    return Inventory(local, peers, tuple(servers))


@dataclass(frozen=True)
class Comparison:
    reports: tuple[ExecutionReport, ...]
    mdc_makespans: tuple[float, ...] = field(default=(), repr=False)

    @property
    def ordering(self) -> list[str]:
        """Strategy labels from slowest to fastest."""
        return [r.strategy for r in sorted(self.reports, key=lambda r: -r.makespan)]

    def by_strategy(self) -> dict[str, ExecutionReport]:
        return {r.strategy: r for r in self.reports}


def compare_strategies(
    batch: TaskBatch,
    inventory: Inventory,
    seeds: Sequence[int],
    k: int = 2,
    mdc_host: bool = True,
) -> Comparison:
    """Local, MDC (averaged over ``seeds``), single MEC and ``k`` collaborating MEC servers."""
    if not seeds:
        raise ValueError("need at least one MDC seed")
    host = inventory.local if mdc_host else None
    mdc = [estimate_mdc(batch, inventory.peers, s, host) for s in seeds]
    spans = tuple(r.makespan for r in mdc)
    reports = (
        estimate_local(batch, inventory.local),
        ExecutionReport("mdc", float(np.mean(spans)), float(np.mean([r.reassignments for r in mdc]))),
        estimate_mec(batch, inventory.servers, 1),
        estimate_mec(batch, inventory.servers, k),
    )
    return Comparison(reports, spans)
