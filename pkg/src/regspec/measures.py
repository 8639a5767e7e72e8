"""Reference spectral measures and their Stieltjes transforms.

Three absolutely continuous measures appear as limits:

* the Kesten-McKay law of the d-regular tree, supported on
  ``[-2 sqrt(d-1), 2 sqrt(d-1)]``;
* the same law pushed forward under ``lambda -> lambda / (2 sqrt(d-1))``;
* the semicircle law on ``[-1, 1]``.

All three share the shape ``c cos^2(t) / (alpha - beta sin^2(t)) dt`` after the
substitution ``lambda = w0 sin(t)``, which removes the square-root behaviour
at the edges and is used for every quadrature below.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .errors import ConvergenceError, InvalidParametersError
from .spectral import DiscreteMeasure

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(96)
CDF_ABS_TOL = 1e-10
MAX_TREE_MOMENT = 30


def gamma_d(d: int) -> float:
    """Upper bound on the Kesten-McKay density."""
    _check_degree(d)
    if d <= 6:
        return d / (4 * math.pi * math.sqrt(d * d - 4 * (d - 1)))
    return math.sqrt(d - 1) / (d * math.pi)


def gamma_tilde_d(d: int) -> float:
    """Upper bound on the rescaled Kesten-McKay density."""
    _check_degree(d)
    if d <= 6:
        return d * math.sqrt(d - 1) / (2 * math.pi * math.sqrt(d * d - 4 * (d - 1)))
    return (2 / math.pi) * (d - 1) / d


def _check_degree(d: int) -> None:
    if int(d) != d or d < 3:
        raise InvalidParametersError(f"degree must be an integer >= 3, got {d}")


@dataclass(frozen=True)
class AnalyticMeasure:
    """Probability measure with density ``c cos(t) / (w0 (alpha - beta sin^2 t))``
    at ``lambda = w0 sin t`` on ``(-w0, w0)``.

    ``sup_bound`` is the declared bound on the density, ``name`` a tag such
    as ``"kesten-mckay(3)"``.
    """

    name: str
    w0: float
    sup_bound: float
    c: float
    alpha: float
    beta: float

    @property
    def support(self) -> tuple[float, float]:
        return (-self.w0, self.w0)

    def density(self, lam):
        s = np.asarray(lam, dtype=float) / self.w0
        inside = np.abs(s) < 1
        s_in = np.where(inside, s, 0.0)
        val = self.c * np.sqrt(1 - s_in * s_in) / (self.w0 * (self.alpha - self.beta * s_in * s_in))
        return np.where(inside, val, 0.0)

    def theta_integrand(self, theta):
        """Density times d(lambda)/d(theta) at ``lambda = w0 sin(theta)``."""
        s = np.sin(theta)
        cs = np.cos(theta)
        return self.c * cs * cs / (self.alpha - self.beta * s * s)

    def theta_of(self, t):
        return np.arcsin(np.clip(np.asarray(t, dtype=float) / self.w0, -1.0, 1.0))

    def cdf(self, t):
        """Vectorized CDF by fixed Gauss-Legendre quadrature in theta.

        The theta integrand is analytic on a strip around the real axis, so 96
        nodes give close to machine precision; :func:`analytic_cdf` is the
        adaptive, error-controlled reference.
        """
        t = np.asarray(t, dtype=float)
        th = self.theta_of(t)
        half = 0.5 * (th + math.pi / 2)
        mid = 0.5 * (th - math.pi / 2)
        nodes = mid[..., None] + half[..., None] * _GL_NODES
        val = half * np.sum(_GL_WEIGHTS * self.theta_integrand(nodes), axis=-1)
        return np.clip(val, 0.0, 1.0)

    def grid(self, num: int) -> np.ndarray:
        return np.linspace(-self.w0, self.w0, num)


def kesten_mckay(d: int) -> AnalyticMeasure:
    """Spectral measure of a vertex of the infinite d-regular tree."""
    _check_degree(d)
    return _build("kesten-mckay", d)


def rescaled_km(d: int) -> AnalyticMeasure:
    """Kesten-McKay law of ``A / (2 sqrt(d-1))``, supported on (-1, 1)."""
    _check_degree(d)
    return _build("rescaled-kesten-mckay", d)


def semicircle() -> AnalyticMeasure:
    """Semicircle law ``(2/pi) sqrt(1 - lambda^2)`` on (-1, 1)."""
    return _build("semicircle", 0)


@lru_cache(maxsize=None)
def _build(kind: str, d: int) -> AnalyticMeasure:
    if kind == "kesten-mckay":
        w0 = 2 * math.sqrt(d - 1)
        m = AnalyticMeasure(f"kesten-mckay({d})", w0, gamma_d(d), d * w0 * w0 / (2 * math.pi), float(d * d), w0 * w0)
    elif kind == "rescaled-kesten-mckay":
        m = AnalyticMeasure(f"rescaled-kesten-mckay({d})", 1.0, gamma_tilde_d(d), 2 * d * (d - 1) / math.pi, float(d * d), 4.0 * (d - 1))
    else:
        m = AnalyticMeasure("semicircle", 1.0, 2 / math.pi, 2 / math.pi, 1.0, 0.0)
    grid_max = float(m.density(m.grid(10_001)).max())
    if grid_max > m.sup_bound * (1 + 1e-9) + 1e-12:
        warnings.warn(f"{m.name}: density grid maximum {grid_max} exceeds declared bound {m.sup_bound}")
    return m


def measure_from_name(name: str, d: int | None = None) -> AnalyticMeasure:
    """Look up a reference measure by CLI-style name."""
    key = name.lower()
    if key in ("sc", "semicircle"):
        return semicircle()
    if d is None:
        raise InvalidParametersError(f"measure {name!r} needs a degree")
    if key in ("km", "kesten-mckay"):
        return kesten_mckay(d)
    if key in ("rkm", "rescaled-km", "rescaled-kesten-mckay"):
        return rescaled_km(d)
    raise InvalidParametersError(f"unknown measure {name!r}")


def analytic_cdf(m: AnalyticMeasure, t):
    """CDF by adaptive quadrature with absolute error at most 1e-10."""
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.empty_like(ts)
    for i, ti in enumerate(ts):
        if ti <= -m.w0:
            out[i] = 0.0
            continue
        if ti >= m.w0:
            out[i] = 1.0
            continue
        val, err = integrate.quad(m.theta_integrand, -math.pi / 2, float(m.theta_of(ti)), epsabs=1e-13, epsrel=1e-13, limit=200)
        if err > CDF_ABS_TOL:
            raise ConvergenceError(f"CDF quadrature error {err:.2e} at t={ti}")
        out[i] = min(max(val, 0.0), 1.0)
    return float(out[0]) if scalar else out


def semicircle_cdf(t):
    """Closed form ``1/2 + (t sqrt(1-t^2) + arcsin t) / pi`` on [-1, 1]."""
    s = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    return 0.5 + (s * np.sqrt(1 - s * s) + np.arcsin(s)) / math.pi


def quad_moment(m: AnalyticMeasure, k: int) -> float:
    """Integral of lambda^k against m by adaptive quadrature."""
    f = lambda th: (m.w0 * math.sin(th)) ** k * m.theta_integrand(th)
    with warnings.catch_warnings():
        # roundoff warnings are superseded by the explicit error check below
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, err = integrate.quad(f, -math.pi / 2, math.pi / 2, epsabs=1e-14, epsrel=1e-13, limit=200)
    # odd moments vanish by cancellation of terms of size w0^k
    if err > 1e-9 * max(1.0, abs(val), m.w0**k):
        raise ConvergenceError(f"moment quadrature error {err:.2e}")
    return val


def tree_moment(d: int, k: int) -> int:
    """Number of closed walks of length k from a vertex of the d-regular tree.

    Dynamic programming over the distance from the start vertex: from the
    start there are d ways out, elsewhere one way back and d-1 ways further.
    """
    _check_degree(d)
    if k < 0:
        raise InvalidParametersError("k must be nonnegative")
    if k > MAX_TREE_MOMENT:
        raise InvalidParametersError(f"k > {MAX_TREE_MOMENT} not supported")
    ways = [1] + [0] * k
    for _ in range(k):
        nxt = [0] * (k + 1)
        for r, c in enumerate(ways):
            if not c:
                continue
            if r == 0:
                nxt[1] += d * c
            else:
                nxt[r - 1] += c
                if r + 1 <= k:
                    nxt[r + 1] += (d - 1) * c
        ways = nxt
    return ways[0]


def sqrt_upper(w):
    """Square root with nonnegative imaginary part.

    Principal root, negated when its imaginary part is negative.  On the
    positive real axis the result is real.
    """
    r = np.sqrt(np.asarray(w, dtype=complex))
    return np.where(r.imag < 0, -r, r)


def _check_upper(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag <= 0):
        raise InvalidParametersError("need Im z > 0")
    return z


def _maybe_scalar(z_in, out):
    return complex(out) if np.ndim(z_in) == 0 else out


def gamma_branch(z, d: int):
    """Green function at the root of a rooted (d-1)-ary branch, zero potential.

    Solves ``(d-1) G^2 + z G + 1 = 0``; of the two roots, whose product is the
    positive number 1/(d-1), exactly one lies in the upper half-plane.
    """
    _check_degree(d)
    zz = _check_upper(z)
    # (-z + s) / (2(d-1)) rewritten as -2 / (z + s) to avoid cancellation
    out = -2 / (zz + sqrt_upper(zz * zz - 4 * (d - 1)))
    return _maybe_scalar(z, out)


def gamma_tree(z, d: int):
    """Stieltjes transform of the Kesten-McKay law, ``int (l - z)^-1 dsigma``.

    ``((d-2) z - d sqrt(z^2 - 4(d-1))) / (2 (z^2 - d^2))`` with the root in the
    upper half-plane; equivalently ``-1 / (z + d G_b)`` for the branch value
    ``G_b`` of :func:`gamma_branch`.
    """
    _check_degree(d)
    zz = _check_upper(z)
    out = ((d - 2) * zz - d * sqrt_upper(zz * zz - 4 * (d - 1))) / (2 * (zz * zz - d * d))
    return _maybe_scalar(z, out)


def gamma_tree_sign_flipped(z, d: int):
    """The variant ``(-z(d-2) - d sqrt(z^2 - 4(d-1))) / (2(z^2 - d^2))``.

    Kept for comparison only: it differs from :func:`gamma_tree` in the sign of
    the linear term, decays like ``-(d-1)/z`` and is not the transform of a
    probability measure.
    """
    _check_degree(d)
    zz = _check_upper(z)
    out = (-(d - 2) * zz - d * sqrt_upper(zz * zz - 4 * (d - 1))) / (2 * (zz * zz - d * d))
    return _maybe_scalar(z, out)


def gamma_sc(z):
    """Stieltjes transform of the semicircle law on (-1, 1): ``-2z + 2 sqrt(z^2 - 1)``."""
    zz = _check_upper(z)
    # -2z + 2s with s^2 = z^2 - 1 equals -2 / (z + s); the latter is stable
    return _maybe_scalar(z, -2 / (zz + sqrt_upper(zz * zz - 1)))


def gamma_sc_paper(z):
    """``-(z - sqrt(z^2 - 4)) / 2``: the transform of the semicircle on (-2, 2)."""
    zz = _check_upper(z)
    return _maybe_scalar(z, -2 / (zz + sqrt_upper(zz * zz - 4)))


def stieltjes_numeric(m, z: complex, tol: float = 1e-9) -> complex:
    """``int (lambda - z)^-1 dm(lambda)``: exact sum or adaptive quadrature."""
    z = complex(z)
    if z.imag <= 0:
        raise InvalidParametersError("need Im z > 0")
    if isinstance(m, DiscreteMeasure):
        return complex(np.sum(m.weights / (m.atoms - z)))
    lam = lambda th: m.w0 * math.sin(th)
    pts = None
    if abs(z.real) < m.w0:
        pts = [math.asin(z.real / m.w0)]
    re_f = lambda th: m.theta_integrand(th) * (lam(th) - z.real) / ((lam(th) - z.real) ** 2 + z.imag**2)
    im_f = lambda th: m.theta_integrand(th) * z.imag / ((lam(th) - z.real) ** 2 + z.imag**2)
    out = []
    for f in (re_f, im_f):
        val, err = integrate.quad(f, -math.pi / 2, math.pi / 2, points=pts, epsabs=tol / 10, epsrel=1e-12, limit=500)
        if err > tol:
            raise ConvergenceError(f"Stieltjes quadrature error {err:.2e} at z={z}")
        out.append(val)
    return complex(out[0], out[1])


def density_table(m: AnalyticMeasure, num: int, exact: bool = False):
    """Uniform grid over the support with density and CDF columns."""
    if num < 2:
        raise InvalidParametersError("grid needs at least two points")
    lam = m.grid(num)
    cdf = analytic_cdf(m, lam) if exact else m.cdf(lam)
    return lam, m.density(lam), cdf
