"""Anderson operators ``H = A + V`` on regular graphs and truncated trees.

Covers potential sampling, the coupling of graph and tree potentials through
the covering map, the Green-function recursion on trees, the rank-one
(Schur complement) identity, a Monte Carlo density of states and the
coefficients used for delocalization statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import ConvergenceError, DepthTooSmallError, InvalidParametersError
from .graphs import (
    GraphLike,
    RegularGraph,
    TruncatedTree,
    acyclic_radius,
    ball,
    build_truncated_tree,
    cover_map,
    derive_seed,
)
from .measures import gamma_branch
from .spectral import DiscreteMeasure, SpectralDecomposition, symmetric_matrix


@dataclass(frozen=True)
class PotentialSpec:
    """Law of the i.i.d. potential values.

    ``kind="uniform"``: uniform on (-rho0, rho0).  ``kind="table"``: piecewise
    constant density on the cells ``edges[i] < v <= edges[i+1]`` with
    ``densities[i]``, the outer edges being ``-rho0`` and ``rho0``.
    """

    kind: str
    rho0: float
    sup_density: float
    edges: tuple = ()
    densities: tuple = ()

    def __post_init__(self):
        if not self.rho0 > 0:
            raise InvalidParametersError("rho0 must be positive")
        if self.kind == "uniform":
            expected = 1 / (2 * self.rho0)
            if not math.isclose(self.sup_density, expected, rel_tol=1e-12):
                raise InvalidParametersError("uniform spec needs sup_density = 1/(2 rho0)")
        elif self.kind == "table":
            e = np.asarray(self.edges, float)
            p = np.asarray(self.densities, float)
            if e.size != p.size + 1 or np.any(np.diff(e) <= 0) or np.any(p < 0):
                raise InvalidParametersError("table needs increasing edges and nonnegative densities")
            if not (math.isclose(e[0], -self.rho0) and math.isclose(e[-1], self.rho0)):
                raise InvalidParametersError("table edges must span (-rho0, rho0)")
            if not math.isclose(float(np.dot(p, np.diff(e))), 1.0, rel_tol=1e-9):
                raise InvalidParametersError("table density must integrate to 1")
            if p.max() > self.sup_density * (1 + 1e-12):
                raise InvalidParametersError("table exceeds its declared sup_density")
        else:
            raise InvalidParametersError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def uniform(cls, rho0: float) -> "PotentialSpec":
        if not float(rho0) > 0:
            raise InvalidParametersError("rho0 must be positive")
        return cls("uniform", float(rho0), 1 / (2 * float(rho0)))

    @classmethod
    def table(cls, edges, densities) -> "PotentialSpec":
        e = tuple(float(v) for v in edges)
        p = tuple(float(v) for v in densities)
        return cls("table", e[-1], max(p), e, p)

    def to_json(self) -> dict:
        out = {"kind": self.kind, "rho0": self.rho0, "sup_density": self.sup_density}
        if self.kind == "table":
            out["edges"] = list(self.edges)
            out["densities"] = list(self.densities)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "PotentialSpec":
        if obj["kind"] == "table":
            return cls.table(obj["edges"], obj["densities"])
        return cls.uniform(obj["rho0"])

    def draw(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "uniform":
            v = rng.uniform(-self.rho0, self.rho0, size)
        else:
            e = np.asarray(self.edges)
            p = np.asarray(self.densities)
            mass = p * np.diff(e)
            cell = rng.choice(p.size, size=size, p=mass / mass.sum())
            v = e[cell] + rng.random(size) * np.diff(e)[cell]
        # keep the support open at -rho0 (a probability-zero event)
        return np.where(v <= -self.rho0, 0.0, v)


@dataclass(frozen=True, eq=False)
class Potential:
    values: np.ndarray
    spec: PotentialSpec
    seed: int

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.shape[0]

    def to_json(self) -> dict:
        return {"spec": self.spec.to_json(), "seed": int(self.seed), "values": self.values.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "Potential":
        return cls(np.asarray(obj["values"], float), PotentialSpec.from_json(obj["spec"]), int(obj["seed"]))


@dataclass(frozen=True)
class GreenSample:
    z: complex
    value: complex
    site: int = 0


class RankOneResult(NamedTuple):
    gamma: complex
    xi: complex
    residual: float
    im_residual: float


@dataclass(frozen=True)
class DosEstimate:
    """Mean of ``Im G(lambda + i eta) / pi`` over trials, with standard error."""

    lam: np.ndarray
    eta: float
    density: np.ndarray
    stderr: np.ndarray
    trials: int


@dataclass(frozen=True)
class EdgelessGraph:
    """n isolated vertices; with a potential this is a fully localized operator."""

    n: int
    d: int = field(default=0)

    @property
    def num_vertices(self) -> int:
        return self.n

    def neighbors(self, v: int) -> list[int]:
        return []


def _values(V, size: int) -> np.ndarray:
    if V is None:
        return np.zeros(size)
    v = np.asarray(getattr(V, "values", V), dtype=float)
    if v.shape != (size,):
        raise InvalidParametersError(f"potential length {v.shape[0] if v.ndim else 0} != {size}")
    return v


def sample_potential(spec: PotentialSpec, n: int, seed: int) -> Potential:
    """n i.i.d. values drawn from ``spec``, reproducible from ``seed``."""
    if n < 1:
        raise InvalidParametersError("n must be positive")
    if not isinstance(spec, PotentialSpec):
        raise InvalidParametersError("spec must be a PotentialSpec")
    rng = np.random.default_rng(seed)
    return Potential(spec.draw(rng, n), spec, int(seed))


def couple_potentials(
    g: RegularGraph, x: int, tree: TruncatedTree, spec: PotentialSpec, seed: int
) -> tuple[Potential, Potential]:
    """Graph and tree potentials that agree on B_R(x) under the covering map.

    Both are i.i.d. with law ``spec``: the tree values are drawn first, copied
    onto the ball, and every other graph vertex gets a fresh draw.
    """
    r, _ = acyclic_radius(g, x)
    if tree.depth < r:
        raise DepthTooSmallError(f"tree depth {tree.depth} < acyclic radius {r}")
    tseed, gseed = derive_seed(seed, 0), derive_seed(seed, 1)
    vt = spec.draw(np.random.default_rng(tseed), tree.num_vertices)
    vg = spec.draw(np.random.default_rng(gseed), g.n)
    img = cover_map(g, x, tree, r)
    covered = img >= 0
    vg[img[covered]] = vt[covered]
    return Potential(vg, spec, gseed), Potential(vt, spec, tseed)


def hamiltonian(g: GraphLike, V) -> np.ndarray:
    """Dense ``A + diag(V)``; for an :class:`EdgelessGraph` just ``diag(V)``."""
    if isinstance(g, EdgelessGraph):
        return np.diag(_values(V, g.n))
    n = g.num_vertices
    if V is not None and np.asarray(getattr(V, "values", V)).shape != (n,):
        raise InvalidParametersError("potential length does not match the vertex count")
    return symmetric_matrix(g, V)


def tree_green(tree: TruncatedTree, V, z, return_children: bool = False):
    """Green function at the root of a truncated tree by the upward recursion.

    Each vertex at the cut carries its missing d-1 children as zero-potential
    branches with the closed-form value; then
    ``G_u = 1 / (omega_u - z - sum_children G_child)`` level by level.  ``z``
    may be an array; the result has the same shape.  With
    ``return_children`` the values at the root's children are returned too.
    """
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise InvalidParametersError("need Im z > 0")
    omega = _values(V, tree.num_vertices)
    d, L = tree.d, tree.depth
    gb = np.asarray(gamma_branch(z, d))
    off = tree.level_offsets
    lv = slice(off[L], off[L + 1])
    if L == 0:
        missing = d - 1 if tree.rooted else d
    else:
        missing = d - 1
    g = 1.0 / (omega[lv][..., None] - z.ravel() - missing * gb.ravel())
    for l in range(L - 1, -1, -1):
        c = tree.children_per_vertex(l)
        children = g
        sums = children.reshape(-1, c, children.shape[-1]).sum(axis=1)
        g = 1.0 / (omega[off[l] : off[l + 1]][..., None] - z.ravel() - sums)
    root = g[0].reshape(z.shape)
    if return_children:
        kids = children.reshape(-1, *z.shape) if L > 0 else np.zeros((0,) + z.shape, complex)
        return root, kids
    return root


def tree_green_batch(tree: TruncatedTree, omega: np.ndarray, z) -> np.ndarray:
    """Root Green functions for a stack of potentials on one tree.

    ``omega`` has shape ``(B, num_vertices)``; ``z`` is a 1-d array with
    positive imaginary parts.  Returns shape ``(B, len(z))``; row b equals
    ``tree_green(tree, omega[b], z)``.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(z.imag <= 0):
        raise InvalidParametersError("need Im z > 0")
    omega = np.asarray(omega, dtype=float)
    if omega.ndim != 2 or omega.shape[1] != tree.num_vertices:
        raise InvalidParametersError("omega must have shape (B, num_vertices)")
    d, L = tree.d, tree.depth
    gb = np.asarray(gamma_branch(z, d))
    off = tree.level_offsets
    missing = (d if not tree.rooted else d - 1) if L == 0 else d - 1
    g = 1.0 / (omega[:, off[L] : off[L + 1], None] - z - missing * gb)
    for l in range(L - 1, -1, -1):
        c = tree.children_per_vertex(l)
        sums = g.reshape(g.shape[0], -1, c, z.size).sum(axis=2)
        g = 1.0 / (omega[:, off[l] : off[l + 1], None] - z - sums)
    return g[:, 0, :]


def tree_green_recursive(d: int, depth: int, V, z: complex) -> GreenSample:
    """Green function at the root of the full depth-``depth`` tree."""
    if depth < 1:
        raise InvalidParametersError("depth must be at least 1")
    tree = build_truncated_tree(d, depth)
    value = complex(tree_green(tree, V, complex(z)))
    return GreenSample(complex(z), value, 0)


def dos_mc(d: int, spec: PotentialSpec | None, lam, eta: float, depth: int, trials: int, seed: int) -> DosEstimate:
    """Smoothed density of states ``E[Im G_root(lambda + i eta)] / pi``.

    Trial t uses the potential drawn from ``derive_seed(seed, t)``; sums are
    reduced in trial order.  ``spec=None`` means zero potential, which is
    deterministic (one evaluation, zero standard error).
    """
    if eta <= 0:
        raise InvalidParametersError("eta must be positive")
    if trials < 1:
        raise InvalidParametersError("trials must be positive")
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    z = lam + 1j * eta
    tree = build_truncated_tree(d, depth)
    if spec is None:
        dens = tree_green(tree, None, z).imag / math.pi
        return DosEstimate(lam, eta, dens, np.zeros_like(dens), 1)
    total = np.zeros(lam.shape)
    total_sq = np.zeros(lam.shape)
    for t in range(trials):
        v = spec.draw(np.random.default_rng(derive_seed(seed, t)), tree.num_vertices)
        val = tree_green(tree, v, z).imag / math.pi
        total += val
        total_sq += val * val
    mean = total / trials
    var = np.maximum(total_sq / trials - mean * mean, 0.0)
    stderr = np.sqrt(var / max(trials - 1, 1))
    return DosEstimate(lam, eta, mean, stderr, trials)


def _solve_green(H: np.ndarray, x0: int, z: complex) -> complex:
    n = H.shape[0]
    rhs = np.zeros(n, complex)
    rhs[x0] = 1.0
    try:
        u = sla.solve(H - z * np.eye(n), rhs, assume_a="sym")
    except (sla.LinAlgError, ValueError) as exc:
        raise ConvergenceError(f"resolvent solve failed: {exc}") from exc
    return complex(u[x0])


def green_at(g: GraphLike, V, x0: int, z: complex) -> complex:
    """``<delta_x0, (H - z)^-1 delta_x0>`` by a dense linear solve."""
    if complex(z).imag <= 0:
        raise InvalidParametersError("need Im z > 0")
    return _solve_green(hamiltonian(g, V), x0, complex(z))


def rank_one_check(g: GraphLike, V, x0: int, z: complex) -> RankOneResult:
    """Check ``G(x0) = 1 / (omega_x0 - Xi)`` with ``Xi = -1 / G(x0; V with omega_x0 = 0)``.

    Also checks the imaginary-part form
    ``Im G = Im Xi / ((omega_x0 - Re Xi)^2 + (Im Xi)^2)``.
    """
    z = complex(z)
    if z.imag <= 0:
        raise InvalidParametersError("need Im z > 0")
    H = hamiltonian(g, V)
    omega = float(H[x0, x0])
    gamma = _solve_green(H, x0, z)
    Hh = H.copy()
    Hh[x0, x0] = 0.0
    xi = -1.0 / _solve_green(Hh, x0, z)
    residual = abs(gamma - 1.0 / (omega - xi))
    im_form = xi.imag / ((omega - xi.real) ** 2 + xi.imag**2)
    return RankOneResult(gamma, xi, float(residual), float(abs(gamma.imag - im_form)))


def green_diagonal(dec: SpectralDecomposition, z) -> np.ndarray:
    """``G(x, x; z)`` for all x, shape ``(n,) + shape(z)``."""
    z = np.asarray(z, dtype=complex)
    res = 1.0 / (dec.eigenvalues[:, None] - z.ravel()[None, :])
    out = (dec.eigenvectors**2) @ res
    return out.reshape((dec.n,) + z.shape)


def tree_root_measure(tree: TruncatedTree, V) -> DiscreteMeasure:
    """Spectral measure of the root for ``A + V`` on the truncated tree."""
    lam, phi = np.linalg.eigh(hamiltonian(tree, V))
    return DiscreteMeasure.from_points(lam, phi[0] ** 2, merge_tol=1e-9 * max(1.0, np.abs(lam).max()))


def deloc_coefficients(dec: SpectralDecomposition, x0: int, interval) -> np.ndarray:
    """``c_j = |phi_j(x0)|^2`` for eigenvalues in (a, b], else 0."""
    a, b = interval
    lam = dec.eigenvalues
    inside = (lam > a) & (lam <= b)
    return np.where(inside, dec.eigenvectors[x0] ** 2, 0.0)


def ball_mass(dec: SpectralDecomposition, c: np.ndarray, g, x0: int, r: int) -> tuple[float, int]:
    """``sum_{x in B_r(x0)} sum_j c_j |phi_j(x)|^2`` and ``|B_r(x0)|``."""
    if r < 0:
        raise InvalidParametersError("r must be nonnegative")
    verts = ball(g, x0, r)
    w = dec.eigenvectors[verts, :] ** 2
    return float(np.sum(w @ c)), len(verts)
