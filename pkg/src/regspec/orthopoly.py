"""Orthonormal polynomials, Gauss rules and the Chebyshev-Markov-Stieltjes bound.

For a measure sigma with orthonormal polynomials P_0, P_1, ... the
Christoffel function ``1 / sum_{n<=N} P_n(t)^2`` bounds how far the CDF of any
measure sharing the first 2N moments can be from the CDF of sigma at t.
For a density bounded by ``|w|_inf`` on ``(-w0, w0)`` a Fejer-type majorant
gives the uniform bound ``2 pi |w|_inf w0 / N*``, with N* the largest odd
number not exceeding N.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.linalg import eigh_tridiagonal

from .errors import ConvergenceError, InvalidParametersError, MeasureDegenerateError
from .measures import AnalyticMeasure
from .spectral import DiscreteMeasure

DEGENERATE_TOL = 1e-13


@dataclass(frozen=True, eq=False)
class RecurrenceCoefficients:
    """``b_{k+1} P_{k+1} = (t - a_k) P_k - b_k P_{k-1}``, ``P_0 = mass^{-1/2}``.

    ``a`` holds a_0..a_N and ``b`` holds b_1..b_N (so ``b[k-1]`` is b_k).
    """

    a: np.ndarray
    b: np.ndarray
    mass: float
    source: str
    N: int


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    shift: float
    M: int

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))

    def as_measure(self) -> DiscreteMeasure:
        return DiscreteMeasure.from_points(self.nodes, self.weights)


def n_star(N: int) -> int:
    """Largest odd integer not exceeding N."""
    return N if N % 2 else N - 1


def discretize(m: AnalyticMeasure, num: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule in theta, mapped to lambda = w0 sin(theta).

    Integrates ``p(lambda) dm`` to near machine precision for polynomials of
    degree well below ``num``: the theta integrand is a trigonometric
    polynomial times a function analytic in a strip.
    """
    x, w = np.polynomial.legendre.leggauss(num)
    theta = 0.5 * math.pi * x
    return m.w0 * np.sin(theta), 0.5 * math.pi * w * m.theta_integrand(theta)


def _fdot(*arrays) -> float:
    return math.fsum(np.prod(np.vstack(arrays), axis=0))


def recurrence_coefficients(m, N: int, nodes: int | None = None) -> RecurrenceCoefficients:
    """Recurrence coefficients up to degree N by the discretized Stieltjes procedure.

    Inner products are accumulated with ``math.fsum``.  Analytic measures are
    first replaced by a Gauss-Legendre discretization with ``nodes`` points
    (default ``max(400, 4N + 64)``); discrete measures are used as they are.
    """
    if N < 1:
        raise InvalidParametersError("N must be at least 1")
    if isinstance(m, DiscreteMeasure):
        x, w = m.atoms, m.weights
        keep = w > 0
        x, w = x[keep], w[keep]
        source = "discrete"
        if x.size < N + 1:
            raise MeasureDegenerateError(f"{x.size} support points cannot carry degree {N}")
    else:
        x, w = discretize(m, nodes or max(400, 4 * N + 64))
        source = m.name
    mass = math.fsum(w)
    if mass <= 0:
        raise MeasureDegenerateError("measure has no mass")
    a = np.zeros(N + 1)
    b = np.zeros(N)
    p_prev = np.zeros_like(x)
    p = np.full_like(x, 1 / math.sqrt(mass))
    for k in range(N + 1):
        a[k] = _fdot(w, x, p, p)
        if k == N:
            break
        r = (x - a[k]) * p - (b[k - 1] * p_prev if k else 0.0)
        nrm = math.sqrt(_fdot(w, r, r))
        if nrm <= DEGENERATE_TOL:
            raise MeasureDegenerateError(f"b_{k + 1} = {nrm:.2e}: support too small for degree {k + 1}")
        b[k] = nrm
        p_prev, p = p, r / nrm
    return RecurrenceCoefficients(a, b, mass, source, N)


def eval_orthopolys(rc: RecurrenceCoefficients, t, N: int | None = None) -> np.ndarray:
    """Values P_0(t), ..., P_N(t) stacked along the first axis."""
    N = rc.N if N is None else N
    if not 0 <= N <= rc.N:
        raise InvalidParametersError(f"degree {N} outside 0..{rc.N}")
    t = np.asarray(t, dtype=float)
    out = np.empty((N + 1,) + t.shape)
    out[0] = 1 / math.sqrt(rc.mass)
    if N >= 1:
        out[1] = (t - rc.a[0]) * out[0] / rc.b[0]
    for k in range(1, N):
        out[k + 1] = ((t - rc.a[k]) * out[k] - rc.b[k - 1] * out[k - 1]) / rc.b[k]
    return out


def christoffel_number(rc: RecurrenceCoefficients, N: int, t):
    """``1 / sum_{n=0}^{N} P_n(t)^2``."""
    p = eval_orthopolys(rc, t, N)
    return 1.0 / np.sum(p * p, axis=0)


def gauss_rule(rc: RecurrenceCoefficients, M: int, s: float = 0.0) -> QuadratureRule:
    """Rule on the zeros of ``P_{M+1} + s P_M``, exact for degree <= 2M.

    The zeros are the eigenvalues of the Jacobi matrix of order M+1 whose last
    diagonal entry is ``a_M - s b_{M+1}``; the weights are the Christoffel
    numbers ``1 / sum_{n<=M} P_n(node)^2``.  For s = 0 this is the Gauss rule,
    exact up to degree 2M+1.
    """
    if M < 0 or M + 1 > rc.N:
        raise InvalidParametersError(f"need 0 <= M and M+1 <= N={rc.N}, got M={M}")
    diag = rc.a[: M + 1].copy()
    diag[M] -= s * rc.b[M]
    off = rc.b[:M]
    try:
        nodes = eigh_tridiagonal(diag, off, eigvals_only=True) if M else diag.copy()
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"Jacobi eigenproblem failed: {exc}") from exc
    nodes = np.sort(nodes)
    weights = christoffel_number(rc, M, nodes)
    return QuadratureRule(nodes, weights, float(s), M)


def gauss_rule_mp(rc: RecurrenceCoefficients, M: int, s: float = 0.0, dps: int = 40):
    """:func:`gauss_rule` evaluated in ``dps``-digit arithmetic (mpmath).

    The rule is built from the same double-precision coefficients, so it is
    the Gauss rule of the measure those coefficients define; evaluating it in
    extended precision removes the cancellation that otherwise swamps odd
    moments of high degree (terms of size |node|^k summing to zero).
    Returns lists of ``mpmath.mpf`` nodes and weights.
    """
    if M < 0 or M + 1 > rc.N:
        raise InvalidParametersError(f"need 0 <= M and M+1 <= N={rc.N}, got M={M}")
    with mpmath.workdps(dps):
        J = mpmath.zeros(M + 1, M + 1)
        for k in range(M + 1):
            J[k, k] = mpmath.mpf(float(rc.a[k]))
        J[M, M] -= mpmath.mpf(float(s)) * mpmath.mpf(float(rc.b[M]))
        for k in range(M):
            J[k, k + 1] = J[k + 1, k] = mpmath.mpf(float(rc.b[k]))
        evals = mpmath.eigsy(J, eigvals_only=True)
        nodes = sorted(evals[i] for i in range(M + 1))
        weights = []
        for t in nodes:
            p_prev, p = mpmath.mpf(0), 1 / mpmath.sqrt(mpmath.mpf(rc.mass))
            acc = p * p
            for k in range(M):
                bk = mpmath.mpf(float(rc.b[k - 1])) if k else mpmath.mpf(0)
                p_prev, p = p, ((t - mpmath.mpf(float(rc.a[k]))) * p - bk * p_prev) / mpmath.mpf(float(rc.b[k]))
                acc += p * p
            weights.append(1 / acc)
    return nodes, weights


def quadrature_errors(rc: RecurrenceCoefficients, M: int, s: float, moments: dict, dps: int = 40) -> dict:
    """``{k: |m_k - sum_j w_j node_j^k|}`` with the rule evaluated in extended precision.

    ``moments`` maps each degree k to the exact moment m_k of the measure.
    """
    nodes, weights = gauss_rule_mp(rc, M, s, dps)
    out = {}
    with mpmath.workdps(dps):
        for k, exact in moments.items():
            total = mpmath.fsum(w * t**k for t, w in zip(nodes, weights))
            out[k] = float(abs(total - mpmath.mpf(exact)))
    return out


def fejer_kernel(N: int) -> C.Chebyshev:
    """The even polynomial F_{2N-2} in Chebyshev form.

    ``F(x) = 1/(2n+1) + 2/(2n+1)^2 sum_{m=1}^{2n} (2n-m+1) (-1)^m T_{2m}(x)``
    with ``n = floor((2N-2)/4)``.  Under ``x = cos(phi)`` this is the Fejer
    kernel of order 2n in the variable ``2 phi - pi``: nonnegative, equal to
    1 at x = 0 and with double zeros at ``cos(pi/2 + k pi/(2n+1))``.
    """
    if N < 2:
        raise InvalidParametersError("N must be at least 2")
    n = (2 * N - 2) // 4
    coef = np.zeros(4 * n + 1)
    coef[0] = 1 / (2 * n + 1)
    for m in range(1, 2 * n + 1):
        coef[2 * m] = 2 * (2 * n - m + 1) * (-1) ** m / (2 * n + 1) ** 2
    return C.Chebyshev(coef)


def fejer_polynomial(N: int, w0: float, t: float, lam):
    """``S(lambda) = F_{2N-2}((lambda - t) / (2 w0))`` for |t| < w0."""
    if w0 <= 0 or abs(t) >= w0:
        raise InvalidParametersError("need w0 > 0 and |t| < w0")
    x = (np.asarray(lam, dtype=float) - t) / (2 * w0)
    return fejer_kernel(N)(x)


def fejer_integral(N: int, w0: float, t: float) -> float:
    """Exact integral of S over (-w0, w0)."""
    F = fejer_kernel(N).integ()
    lo, hi = (-w0 - t) / (2 * w0), (w0 - t) / (2 * w0)
    return float(2 * w0 * (F(hi) - F(lo)))


def cms_bound(m_ref: AnalyticMeasure, N: int) -> float:
    """Uniform Kolmogorov bound ``2 pi |w|_inf w0 / N*``."""
    if N < 2:
        raise InvalidParametersError("N must be at least 2")
    return 2 * math.pi * m_ref.sup_bound * m_ref.w0 / n_star(N)
