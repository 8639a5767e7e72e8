"""Random regular graphs and their local tree-like geometry.

Graphs are sampled uniformly from the simple d-regular graphs on n labeled
vertices with the pairing model, restarting on any loop or multiple edge.
The geometry helpers (acyclic radius, tree-like fraction, cycle census) run
on a CSR view of the adjacency, so they accept both :class:`RegularGraph`
and :class:`TruncatedTree`.
"""

from __future__ import annotations

import json
import os
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Union

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .errors import BudgetExceededError, InvalidParametersError

DEFAULT_BUDGET = 10**8
DEFAULT_MAX_RESTARTS = 10**8
DEFAULT_MAX_TREE_VERTICES = 10**7
BUDGET_ENV = "REGSPEC_BUDGET"


def enumeration_budget(budget: int | None = None) -> int:
    """Node budget for enumerations: explicit value, then env var, then default."""
    if budget is not None:
        return int(budget)
    raw = os.environ.get(BUDGET_ENV)
    if raw:
        try:
            return int(float(raw))
        except ValueError as exc:
            raise InvalidParametersError(f"{BUDGET_ENV}={raw!r} is not a number") from exc
    return DEFAULT_BUDGET


def derive_seed(seed: int, *keys: int) -> int:
    """Deterministic 64-bit child seed of ``seed`` for the given integer keys."""
    if seed < 0 or any(k < 0 for k in keys):
        raise InvalidParametersError("seeds and keys must be nonnegative")
    ss = np.random.SeedSequence([int(seed), *map(int, keys)])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class RegularGraph:
    """Simple d-regular graph; ``adj`` is an ``(n, d)`` table of sorted neighbors."""

    n: int
    d: int
    adj: np.ndarray
    attempts: int = field(default=1, compare=False)

    def __post_init__(self):
        adj = np.array(self.adj, dtype=np.int64)
        if adj.shape != (self.n, self.d):
            raise InvalidParametersError(f"adjacency shape {adj.shape} != ({self.n}, {self.d})")
        adj.sort(axis=1)
        adj.setflags(write=False)
        object.__setattr__(self, "adj", adj)

    @property
    def num_vertices(self) -> int:
        return self.n

    def neighbors(self, v: int) -> np.ndarray:
        return self.adj[v]

    def edges(self) -> np.ndarray:
        """Edge list with u < v, sorted lexicographically."""
        u = np.repeat(np.arange(self.n), self.d)
        v = self.adj.ravel()
        keep = u < v
        e = np.stack([u[keep], v[keep]], axis=1)
        return e[np.lexsort((e[:, 1], e[:, 0]))]

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        indptr = np.arange(0, self.n * self.d + 1, self.d, dtype=np.int64)
        return indptr, np.ascontiguousarray(self.adj.ravel())

    def validate(self) -> None:
        """Raise if the invariants of a simple d-regular graph fail."""
        if (self.n * self.d) % 2:
            raise InvalidParametersError("n*d must be even")
        a = self.adj
        if np.any(a == np.arange(self.n)[:, None]):
            raise InvalidParametersError("self-loop present")
        if np.any(a[:, 1:] == a[:, :-1]):
            raise InvalidParametersError("multiple edge present")
        if a.min() < 0 or a.max() >= self.n:
            raise InvalidParametersError("neighbor index out of range")
        m = adjacency_matrix(self)
        if (m != m.T).nnz:
            raise InvalidParametersError("adjacency is not symmetric")

    def __eq__(self, other):
        if not isinstance(other, RegularGraph):
            return NotImplemented
        return self.n == other.n and self.d == other.d and np.array_equal(self.adj, other.adj)

    def __hash__(self):
        return hash((self.n, self.d, self.adj.tobytes()))

    def to_json(self) -> dict:
        return {"n": self.n, "d": self.d, "edges": self.edges().tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "RegularGraph":
        n, d = int(obj["n"]), int(obj["d"])
        lists: list[list[int]] = [[] for _ in range(n)]
        for u, v in obj["edges"]:
            lists[u].append(v)
            lists[v].append(u)
        if any(len(l) != d for l in lists):
            raise InvalidParametersError("edge list is not d-regular")
        g = cls(n, d, np.array(lists, dtype=np.int64).reshape(n, d))
        g.validate()
        return g


@dataclass(frozen=True, eq=False)
class TruncatedTree:
    """Regular tree cut at ``depth``, vertices numbered in BFS order.

    ``rooted=False`` is the full tree (root has d children); ``rooted=True``
    is a rooted branch (root has d-1 children).  Children of a vertex are
    contiguous, and ``level_offsets[l]`` is the first vertex at depth l.
    """

    d: int
    depth: int
    rooted: bool
    level_offsets: np.ndarray
    parent: np.ndarray
    root: int = 0

    @property
    def num_vertices(self) -> int:
        return int(self.level_offsets[-1])

    def children_per_vertex(self, level: int) -> int:
        if level >= self.depth:
            return 0
        if level == 0 and not self.rooted:
            return self.d
        return self.d - 1

    def level(self, l: int) -> range:
        return range(int(self.level_offsets[l]), int(self.level_offsets[l + 1]))

    def children(self, v: int) -> range:
        l = int(np.searchsorted(self.level_offsets, v, side="right") - 1)
        c = self.children_per_vertex(l)
        start = int(self.level_offsets[l + 1]) + (v - int(self.level_offsets[l])) * c if c else 0
        return range(start, start + c)

    def neighbors(self, v: int) -> list[int]:
        out = [] if self.parent[v] < 0 else [int(self.parent[v])]
        out.extend(self.children(v))
        return sorted(out)

    @cached_property
    def adj(self) -> list[list[int]]:
        return [self.neighbors(v) for v in range(self.num_vertices)]

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        m = adjacency_matrix(self).tocsr()
        m.sort_indices()
        return m.indptr.astype(np.int64), m.indices.astype(np.int64)

    def depth_of(self) -> np.ndarray:
        """Distance from the root for every vertex."""
        out = np.empty(self.num_vertices, np.int64)
        for l in range(self.depth + 1):
            out[self.level_offsets[l] : self.level_offsets[l + 1]] = l
        return out


@dataclass(frozen=True)
class CycleCensus:
    """Number of cycles of each length 3..kmax."""

    counts: dict[int, int]
    kmax: int

    def __getitem__(self, k: int) -> int:
        return self.counts[k]


GraphLike = Union[RegularGraph, TruncatedTree]


def sample_regular_graph(
    n: int, d: int, seed: int, max_restarts: int | None = None
) -> RegularGraph:
    """Uniform simple d-regular graph on n vertices, deterministic in ``seed``."""
    if d < 3:
        raise InvalidParametersError(f"degree must be at least 3, got {d}")
    if n <= d:
        raise InvalidParametersError(f"need n > d, got n={n}, d={d}")
    if (n * d) % 2:
        raise InvalidParametersError(f"n*d must be even, got n={n}, d={d}")
    if seed < 0:
        raise InvalidParametersError("seed must be nonnegative")
    cap = DEFAULT_MAX_RESTARTS if max_restarts is None else int(max_restarts)
    state = np.random.SeedSequence(int(seed)).generate_state(4, np.uint64)
    attempts, adj = _kernels.pairing_sample(n, d, state, cap)
    if attempts < 0:
        raise BudgetExceededError(
            f"pairing model needed more than {cap} restarts (n={n}, d={d})"
        )
    return RegularGraph(n, d, adj, attempts=int(attempts))


def adjacency_matrix(g: GraphLike) -> sp.csr_matrix:
    """Sparse 0/1 adjacency matrix."""
    if isinstance(g, RegularGraph):
        rows = np.repeat(np.arange(g.n), g.d)
        cols = g.adj.ravel()
        m = g.n
    else:
        child = np.arange(1, g.num_vertices)
        par = g.parent[1:]
        rows = np.concatenate([child, par])
        cols = np.concatenate([par, child])
        m = g.num_vertices
    data = np.ones(rows.shape[0])
    return sp.csr_matrix((data, (rows, cols)), shape=(m, m))


def build_truncated_tree(
    d: int, depth: int, rooted: bool = False, max_vertices: int | None = None
) -> TruncatedTree:
    """Regular tree of the given depth, in BFS layout with vertex 0 as root."""
    if d < 3:
        raise InvalidParametersError(f"degree must be at least 3, got {d}")
    if depth < 0:
        raise InvalidParametersError("depth must be nonnegative")
    cap = DEFAULT_MAX_TREE_VERTICES if max_vertices is None else int(max_vertices)
    sizes = [1]
    for l in range(depth):
        c = d - 1 if (rooted or l > 0) else d
        sizes.append(sizes[-1] * c)
        if sum(sizes) > cap:
            raise BudgetExceededError(f"tree with d={d}, depth={depth} exceeds {cap} vertices")
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    parent = np.full(int(offsets[-1]), -1, np.int64)
    for l in range(depth):
        c = sizes[l + 1] // sizes[l]
        parent[offsets[l + 1] : offsets[l + 2]] = np.repeat(np.arange(offsets[l], offsets[l + 1]), c)
    offsets.setflags(write=False)
    parent.setflags(write=False)
    return TruncatedTree(d=d, depth=depth, rooted=rooted, level_offsets=offsets, parent=parent)


def tree_size(d: int, depth: int, rooted: bool = False) -> int:
    """Vertex count of :func:`build_truncated_tree` without building it."""
    first = d - 1 if rooted else d
    return 1 + sum(first * (d - 1) ** (l - 1) for l in range(1, depth + 1))


def r_star(r: int) -> int:
    """Largest odd integer not exceeding r (for r >= 1)."""
    return r if r % 2 else r - 1


def acyclic_radius(g: GraphLike, x: int, cap: int | None = None) -> tuple[int, int]:
    """``(R, R*)``: largest k with B_k(x) acyclic and its odd floor.

    With ``cap`` the search stops at that radius and returns ``min(R, cap)``.
    """
    if not 0 <= x < g.num_vertices:
        raise InvalidParametersError(f"vertex {x} out of range")
    indptr, indices = g.csr
    r = int(_kernels.acyclic_radii(indptr, indices, np.array([x], np.int64), -1 if cap is None else cap)[0])
    return r, r_star(r) if r >= 1 else 0


def acyclic_radii(g: GraphLike, cap: int | None = None, xs=None) -> np.ndarray:
    """Acyclic radius of every vertex (or of ``xs``), optionally capped."""
    indptr, indices = g.csr
    xs = np.arange(g.num_vertices, dtype=np.int64) if xs is None else np.asarray(xs, np.int64)
    return _kernels.acyclic_radii(indptr, indices, xs, -1 if cap is None else int(cap))


def tree_like_fraction(g: GraphLike, k: int) -> float:
    """Fraction of vertices x whose ball B_k(x) is acyclic."""
    if k < 1:
        raise InvalidParametersError("k must be at least 1")
    r = acyclic_radii(g, cap=k)
    return float(np.count_nonzero(r >= k)) / g.num_vertices


def cycle_census(g: GraphLike, kmax: int, budget: int | None = None, max_kmax: int = 20) -> CycleCensus:
    """Exact counts of cycles of length 3..kmax."""
    if not 3 <= kmax <= max_kmax:
        raise InvalidParametersError(f"kmax must lie in [3, {max_kmax}], got {kmax}")
    limit = enumeration_budget(budget)
    indptr, indices = g.csr
    counts, nodes = _kernels.cycle_counts(indptr, indices, kmax, limit)
    if nodes < 0:
        raise BudgetExceededError(f"cycle enumeration exceeded {limit} nodes")
    return CycleCensus({k: int(counts[k]) for k in range(3, kmax + 1)}, kmax)


def ball(g: GraphLike, x: int, r: int) -> list[int]:
    """Vertices at distance <= r from x, in BFS order."""
    seen = {x: 0}
    order = [x]
    q = deque([x])
    while q:
        u = q.popleft()
        if seen[u] == r:
            continue
        for w in g.neighbors(u):
            w = int(w)
            if w not in seen:
                seen[w] = seen[u] + 1
                order.append(w)
                q.append(w)
    return order


def cover_map(g: RegularGraph, x: int, tree: TruncatedTree, radius: int) -> np.ndarray:
    """Graph vertex under each tree vertex of depth <= radius (else -1).

    Parallel BFS from the tree root and from x: the children of a tree vertex
    are matched, in order, with the sorted neighbors of its image other than
    the image of its parent.  This is the covering map restricted to the
    ball, a bijection onto B_radius(x) when that ball is acyclic.
    """
    if tree.rooted or tree.d != g.d:
        raise InvalidParametersError("need a full tree of the graph's degree")
    radius = min(radius, tree.depth)
    img = np.full(tree.num_vertices, -1, np.int64)
    img[0] = x
    for l in range(radius):
        for v in tree.level(l):
            u = int(img[v])
            p = tree.parent[v]
            excl = int(img[p]) if p >= 0 else -1
            nb = [int(w) for w in g.neighbors(u) if w != excl]
            for c, w in zip(tree.children(v), nb):
                img[c] = w
    return img


def save_graph(g: RegularGraph, path) -> None:
    with open(path, "w") as fh:
        json.dump(g.to_json(), fh)
        fh.write("\n")


def load_graph(path) -> RegularGraph:
    with open(path) as fh:
        return RegularGraph.from_json(json.load(fh))
