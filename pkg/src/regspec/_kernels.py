"""Compiled inner loops (numba).

Everything here works on plain arrays: the sampler on an ``(n, d)`` neighbor
table, the geometry kernels on CSR adjacency ``(indptr, indices)``.  The
public wrappers live in :mod:`regspec.graphs`.
"""

import numba
import numpy as np
from numba import uint64

_MASK32 = 0xFFFFFFFF


# xoshiro256** (Blackman & Vigna).  numba's support for numpy Generator
# objects is several times slower inside tight loops, and the sampler spends
# nearly all of its time drawing partner indices.
@numba.njit(inline="always", cache=True)
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@numba.njit(inline="always", cache=True)
def _next(s):
    result = _rotl(s[1] * uint64(5), 7) * uint64(9)
    t = s[1] << uint64(17)
    s[2] ^= s[0]
    s[3] ^= s[1]
    s[1] ^= s[2]
    s[0] ^= s[3]
    s[2] ^= t
    s[3] = _rotl(s[3], 45)
    return result


@numba.njit(inline="always", cache=True)
def _below(s, bound):
    # Lemire's multiply-and-reject: exactly uniform on [0, bound), bound < 2**32
    b = uint64(bound)
    m = (_next(s) >> uint64(32)) * b
    low = m & uint64(_MASK32)
    if low < b:
        thresh = (uint64(_MASK32 + 1) - b) % b
        while low < thresh:
            m = (_next(s) >> uint64(32)) * b
            low = m & uint64(_MASK32)
    return np.int64(m >> uint64(32))


@numba.njit(cache=True, nogil=True)
def pairing_sample(n, d, state, max_attempts):
    """Pairing model with restart; abort an attempt at the first defect.

    Returns ``(attempts, adj)``; ``attempts == -1`` if the cap was hit.
    Aborting early is equivalent to completing the pairing and rejecting it,
    so accepted outputs are uniform over simple d-regular graphs.
    """
    s = state.copy()
    m = n * d
    stubs = np.empty(m, np.int64)
    for i in range(m):
        stubs[i] = i // d
    adj = np.empty((n, d), np.int64)
    deg = np.zeros(n, np.int64)
    for attempt in range(max_attempts):
        remaining = m
        ok = True
        while remaining > 0:
            u = stubs[remaining - 1]
            j = _below(s, remaining - 1)
            v = stubs[j]
            stubs[j] = stubs[remaining - 2]
            stubs[remaining - 2] = v
            remaining -= 2
            if u == v:
                ok = False
                break
            for t in range(deg[u]):
                if adj[u, t] == v:
                    ok = False
                    break
            if not ok:
                break
            adj[u, deg[u]] = v
            deg[u] += 1
            adj[v, deg[v]] = u
            deg[v] += 1
        if ok:
            return attempt + 1, adj
        # only vertices whose stubs were consumed carry edges
        for i in range(remaining, m):
            deg[stubs[i]] = 0
    return -1, adj


@numba.njit(cache=True, nogil=True)
def acyclic_radii(indptr, indices, xs, cap):
    """Largest k with B_k(x) acyclic, for each x in ``xs`` (capped at ``cap``).

    B_k(x) carries the edges with at least one endpoint at distance < k.
    Processing level j adds the edges leaving level-j vertices; a cycle
    appears exactly when such an edge joins two level-j vertices or reaches
    a level-(j+1) vertex for the second time.  Without a cycle the BFS runs
    until the component is exhausted and R is the eccentricity.
    """
    n = indptr.shape[0] - 1
    dist = np.full(n, -1, np.int64)
    parent = np.full(n, -1, np.int64)
    out = np.empty(xs.shape[0], np.int64)
    visited = np.empty(n, np.int64)
    frontier = np.empty(n, np.int64)
    nxt = np.empty(n, np.int64)
    for q in range(xs.shape[0]):
        x = xs[q]
        dist[x] = 0
        visited[0] = x
        nvis = 1
        frontier[0] = x
        nf = 1
        level = 0
        result = -1
        while result < 0:
            if cap >= 0 and level >= cap:
                result = cap
                break
            nn = 0
            for f in range(nf):
                u = frontier[f]
                for p in range(indptr[u], indptr[u + 1]):
                    w = indices[p]
                    if w == parent[u]:
                        continue
                    if dist[w] == -1:
                        dist[w] = level + 1
                        parent[w] = u
                        visited[nvis] = w
                        nvis += 1
                        nxt[nn] = w
                        nn += 1
                    elif dist[w] == level or dist[w] == level + 1:
                        result = level
                        break
                    # dist[w] == level - 1 with w != parent[u] would have been
                    # caught one level earlier as a second arrival
                if result >= 0:
                    break
            if result >= 0:
                break
            if nn == 0:
                result = level
                break
            for f in range(nn):
                frontier[f] = nxt[f]
            nf = nn
            level += 1
        out[q] = result
        for i in range(nvis):
            dist[visited[i]] = -1
            parent[visited[i]] = -1
    return out


@numba.njit(cache=True, nogil=True)
def cycle_counts(indptr, indices, kmax, budget):
    """Count simple cycles of length 3..kmax, each once.

    A cycle is enumerated from its smallest vertex s along paths through
    vertices > s, and kept only in the orientation whose second vertex is
    smaller than its last.  Returns ``(counts, nodes)``; ``nodes == -1``
    signals that the node budget was exhausted.
    """
    n = indptr.shape[0] - 1
    counts = np.zeros(kmax + 1, np.int64)
    on_path = np.zeros(n, np.bool_)
    path = np.empty(kmax, np.int64)
    ptr = np.empty(kmax, np.int64)
    nodes = 0
    for s in range(n):
        path[0] = s
        on_path[s] = True
        ptr[0] = indptr[s]
        depth = 1
        while depth > 0:
            v = path[depth - 1]
            p = ptr[depth - 1]
            if p < indptr[v + 1]:
                ptr[depth - 1] = p + 1
                w = indices[p]
                if w <= s or on_path[w]:
                    continue
                nodes += 1
                if nodes > budget:
                    return counts, -1
                length = depth + 1
                if length >= 3 and path[1] < w:
                    for q in range(indptr[w], indptr[w + 1]):
                        if indices[q] == s:
                            counts[length] += 1
                            break
                if length < kmax:
                    path[depth] = w
                    on_path[w] = True
                    ptr[depth] = indptr[w]
                    depth += 1
            else:
                on_path[v] = False
                depth -= 1
    return counts, nodes
