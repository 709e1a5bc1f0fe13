"""Independent re-statements of the service rules, used only by tests.

Written against plain sets and job lists; shares nothing with the
package's decision code or replay kernel.
"""
from __future__ import annotations

SOURCES = ["LocalHit", "LocalTranscode", "NeighborHit", "NeighborTranscodeAtProvider",
           "NeighborFetchTranscodeAtDelivery", "OriginFetch"]


def rule_table_replay(strategy, requests, caches, sizes, bitrates, proc_cap, duration, horizon, warmup=0.0):
    """Replay ``requests`` [(t, bs, video, variant)] over static ``caches`` (list of sets of (v, q))."""
    processing = strategy != "co-cache"
    collaborative = strategy != "pro-cache"
    n_bs = len(caches)
    jobs = [[] for _ in range(n_bs)]  # (end, load)
    out = {"counts": dict.fromkeys(SOURCES, 0), "demand": 0.0, "origin": 0.0, "inter": 0.0,
           "busy": [0.0] * n_bs, "decisions": []}

    def in_use(b, t):
        jobs[b] = [j for j in jobs[b] if j[0] > t]
        return sum(load for _, load in jobs[b])

    def higher(b, v, q):
        cands = [qq for qq in range(q) if (v, qq) in caches[b]]
        return max(cands) if cands else None

    for t, b, v, q in requests:
        loads = [in_use(n, t) for n in range(n_bs)]
        src, host, inter, origin, job_src = None, None, 0.0, 0.0, None
        if (v, q) in caches[b]:
            src = "LocalHit"
        if src is None and processing:
            h = higher(b, v, q)
            if h is not None and loads[b] + bitrates[h] <= proc_cap:
                src, host, job_src = "LocalTranscode", b, h
        if src is None and collaborative:
            for n in range(n_bs):
                if n != b and (v, q) in caches[n]:
                    src, inter = "NeighborHit", sizes[q]
                    break
        if src is None and collaborative and processing:
            prov = next((n for n in range(n_bs) if n != b and higher(n, v, q) is not None), None)
            if prov is not None:
                h = higher(prov, v, q)
                if strategy == "pro-cocache":
                    options = ["delivery"]
                elif loads[prov] < loads[b]:
                    options = ["provider", "delivery"]
                else:
                    options = ["delivery", "provider"]
                for opt in options:
                    node = prov if opt == "provider" else b
                    if loads[node] + bitrates[h] <= proc_cap:
                        host, job_src = node, h
                        if opt == "provider":
                            src, inter = "NeighborTranscodeAtProvider", sizes[q]
                        else:
                            src, inter = "NeighborFetchTranscodeAtDelivery", sizes[h]
                        break
        if src is None:
            src, origin = "OriginFetch", sizes[q]
        if host is not None:
            load = bitrates[job_src]
            jobs[host].append((t + duration, load))
            out["busy"][host] += load * max(0.0, min(t + duration, horizon) - max(t, warmup))
        if t >= warmup:
            out["counts"][src] += 1
            out["demand"] += sizes[q]
            out["origin"] += origin
            out["inter"] += inter
        out["decisions"].append(src)
    return out
