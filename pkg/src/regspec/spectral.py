"""Eigendecompositions, local spectral measures and Kolmogorov distances.

Intervals are half-open ``(a, b]`` throughout and distribution functions are
right-continuous, ``F(t) = m((-inf, t])``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import ConvergenceError, DepthTooSmallError, InvalidParametersError
from .graphs import GraphLike, TruncatedTree, adjacency_matrix

TOL_RESID = 1e-10
TOL_ORTHO = 1e-10


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Ascending eigenvalues and orthonormal eigenvectors (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.n else 0.0


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported measure with sorted, distinct atoms."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if a.shape != w.shape:
            raise InvalidParametersError("atoms and weights differ in length")
        if np.any(w < 0):
            raise InvalidParametersError("weights must be nonnegative")
        if a.size > 1 and np.any(np.diff(a) <= 0):
            raise InvalidParametersError("atoms must be strictly increasing; use from_points")
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_points(cls, points, weights=None, merge_tol: float = 0.0) -> "DiscreteMeasure":
        """Sort points and merge those closer than ``merge_tol`` (weights add)."""
        p = np.asarray(points, dtype=float).ravel()
        w = np.ones_like(p) if weights is None else np.asarray(weights, dtype=float).ravel()
        order = np.argsort(p, kind="stable")
        p, w = p[order], w[order]
        ends = cluster_ends(p, merge_tol)
        starts = np.concatenate([[0], ends[:-1] + 1])
        if p.size == 0:
            return cls(p, w)
        # a merged cluster sits at the plain mean of its points
        atoms = np.add.reduceat(p, starts) / (ends - starts + 1)
        return cls(atoms, np.add.reduceat(w, starts))

    @property
    def mass(self) -> float:
        return math.fsum(self.weights)

    def cdf(self, t):
        """m((-inf, t])."""
        c = np.concatenate([[0.0], np.cumsum(self.weights)])
        return c[np.searchsorted(self.atoms, t, side="right")]

    def cdf_left(self, t):
        """m((-inf, t))."""
        c = np.concatenate([[0.0], np.cumsum(self.weights)])
        return c[np.searchsorted(self.atoms, t, side="left")]

    def moment(self, k: int) -> float:
        return float(np.dot(self.weights, self.atoms**k))

    def interval_mass(self, a: float, b: float) -> float:
        """m((a, b])."""
        return float(self.cdf(b) - self.cdf(a))

    def to_json(self) -> dict:
        return {"atoms": self.atoms.tolist(), "weights": self.weights.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "DiscreteMeasure":
        return cls.from_points(obj["atoms"], obj["weights"])


def cluster_ends(values: np.ndarray, tol: float) -> np.ndarray:
    """Index of the last element of each run of sorted values with gaps <= tol."""
    if values.size == 0:
        return np.zeros(0, np.int64)
    gaps = np.diff(values) > tol
    return np.concatenate([np.flatnonzero(gaps), [values.size - 1]]).astype(np.int64)


def default_merge_tol(dec: SpectralDecomposition) -> float:
    """Eigenvalues closer than this are treated as one (degenerate) atom."""
    return 1e-9 * max(1.0, dec.norm)


def symmetric_matrix(g: GraphLike, diag=None) -> np.ndarray:
    """Dense ``A + diag(V)`` for a graph or tree."""
    m = adjacency_matrix(g).toarray()
    if diag is not None:
        v = np.asarray(getattr(diag, "values", diag), dtype=float)
        if v.shape != (m.shape[0],):
            raise InvalidParametersError(f"potential length {v.shape} != {m.shape[0]}")
        m[np.diag_indices_from(m)] += v
    return m


def eig_sym(A, check: bool = True, tol_resid: float = TOL_RESID) -> SpectralDecomposition:
    """Full eigendecomposition of a real symmetric matrix (LAPACK ``syevd``).

    With ``check`` the residual and orthonormality invariants are verified and
    a :class:`ConvergenceError` is raised if either fails.
    """
    sparse_input = sp.issparse(A)
    dense = A.toarray() if sparse_input else np.asarray(A, dtype=float)
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1] or dense.shape[0] < 1:
        raise InvalidParametersError("need a nonempty square matrix")
    if not np.all(np.isfinite(dense)):
        raise InvalidParametersError("matrix has non-finite entries")
    if not np.array_equal(dense, dense.T):
        raise InvalidParametersError("matrix is not exactly symmetric")
    try:
        lam, phi = np.linalg.eigh(dense)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"symmetric eigensolver failed: {exc}") from exc
    dec = SpectralDecomposition(lam, phi)
    if check:
        scale = max(dec.norm, np.finfo(float).tiny)
        prod = (A @ phi) if sparse_input else dense @ phi
        resid = np.linalg.norm(prod - phi * lam, axis=0).max()
        if resid > tol_resid * scale:
            raise ConvergenceError(f"eigen-residual {resid:.3e} exceeds {tol_resid:g}*|A|")
        ortho = np.abs(phi.T @ phi - np.eye(phi.shape[1])).max()
        if ortho > TOL_ORTHO:
            raise ConvergenceError(f"eigenvectors not orthonormal (error {ortho:.3e})")
    return dec


def local_weights(dec: SpectralDecomposition, merge_tol: float | None = None):
    """Cluster atoms and the ``(n, clusters)`` matrix of local weights.

    Row x holds the weights of mu_x on the distinct eigenvalues.  Summing
    |phi_j(x)|^2 over a degenerate cluster makes the result independent of the
    basis chosen inside the eigenspace.
    """
    tol = default_merge_tol(dec) if merge_tol is None else merge_tol
    lam = dec.eigenvalues
    ends = cluster_ends(lam, tol)
    starts = np.concatenate([[0], ends[:-1] + 1])
    w = dec.eigenvectors**2
    cw = np.add.reduceat(w, starts, axis=1)
    atoms = np.add.reduceat(lam, starts) / (ends - starts + 1)
    return atoms, cw


def local_spectral_measure(dec: SpectralDecomposition, x: int, merge_tol: float | None = None) -> DiscreteMeasure:
    """Spectral measure of the basis vector at x: weights |phi_j(x)|^2."""
    if not 0 <= x < dec.n:
        raise InvalidParametersError(f"vertex {x} out of range")
    tol = default_merge_tol(dec) if merge_tol is None else merge_tol
    return DiscreteMeasure.from_points(dec.eigenvalues, dec.eigenvectors[x] ** 2, merge_tol=tol)


def eigenvalue_count(dec: SpectralDecomposition, interval) -> int:
    """Number of eigenvalues in the half-open interval (a, b]."""
    a, b = interval
    lam = dec.eigenvalues
    return int(np.count_nonzero((lam > a) & (lam <= b)))


def _left_limit(F: Callable, t: np.ndarray) -> np.ndarray:
    return F(np.nextafter(t, -np.inf))


def kolmogorov_distance(m: DiscreteMeasure, F: Callable) -> float:
    """sup_t |m((-inf, t]) - F(t)| for a continuous, nondecreasing F.

    Between consecutive atoms the discrete CDF is constant and F is monotone,
    so the supremum is attained at an atom from one side or at +-infinity.
    """
    a = m.atoms
    if a.size == 0:
        return float(F(np.array([np.inf]))[0])
    c = np.cumsum(m.weights)
    right = np.abs(c - F(a))
    left = np.abs(np.concatenate([[0.0], c[:-1]]) - _left_limit(F, a))
    tails = np.abs(np.array([0.0, c[-1]]) - F(np.array([-np.inf, np.inf])))
    return float(max(right.max(), left.max(), tails.max()))


def kolmogorov_distance_discrete(m1: DiscreteMeasure, m2: DiscreteMeasure) -> float:
    """Exact sup_t |m1((-inf, t]) - m2((-inf, t])| over the union of atoms."""
    t = np.union1d(m1.atoms, m2.atoms)
    if t.size == 0:
        return 0.0
    right = np.abs(m1.cdf(t) - m2.cdf(t))
    left = np.abs(m1.cdf_left(t) - m2.cdf_left(t))
    return float(max(right.max(), left.max(), abs(m1.mass - m2.mass)))


def local_moment(g: GraphLike, diag, x: int, k: int) -> float:
    """<delta_x, H^k delta_x> with H = A + diag, by k sparse mat-vecs.

    For a truncated tree the walk must not feel the cut: the tree has to
    extend at least ceil(k/2) + 1 levels below x.
    """
    if k < 0:
        raise InvalidParametersError("k must be nonnegative")
    if isinstance(g, TruncatedTree):
        lvl = int(np.searchsorted(g.level_offsets, x, side="right") - 1)
        if g.depth - lvl < math.ceil(k / 2) + 1:
            raise DepthTooSmallError(f"depth {g.depth} too small for moment {k} at level {lvl}")
    h = adjacency_matrix(g)
    if diag is not None:
        v = np.asarray(getattr(diag, "values", diag), dtype=float)
        if v.shape != (h.shape[0],):
            raise InvalidParametersError("potential length mismatch")
        h = h + sp.diags(v)
    h = h.tocsr()
    # only half the walk needs to be propagated: <e, H^k e> = <H^i e, H^(k-i) e>
    u = np.zeros(h.shape[0])
    u[x] = 1.0
    half = k // 2
    for _ in range(half):
        u = h @ u
    if k % 2:
        return float(u @ (h @ u))
    return float(u @ u)


def format_eigenvalues_csv(values) -> str:
    """One value per line with 17 significant digits."""
    return "".join(f"{v:.17g}\n" for v in np.asarray(values, dtype=float))


def parse_eigenvalues_csv(text: str) -> np.ndarray:
    return np.array([float(line) for line in text.split() if line.strip()])

