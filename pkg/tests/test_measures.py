import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from regspec.errors import InvalidParametersError
from regspec.measures import (
    analytic_cdf,
    density_table,
    gamma_branch,
    gamma_d,
    gamma_sc,
    gamma_sc_paper,
    gamma_tilde_d,
    gamma_tree,
    gamma_tree_sign_flipped,
    kesten_mckay,
    measure_from_name,
    quad_moment,
    rescaled_km,
    semicircle,
    semicircle_cdf,
    stieltjes_numeric,
    tree_moment,
)

DEGREES = [3, 4, 5, 6, 7, 8, 12]


def km_density_textbook(lam, d):
    """Kesten-McKay density in its usual closed form."""
    lam = np.asarray(lam, dtype=float)
    inside = lam * lam < 4 * (d - 1)
    val = d * np.sqrt(np.where(inside, 4 * (d - 1) - lam * lam, 0.0)) / (2 * math.pi * (d * d - lam * lam))
    return np.where(inside, val, 0.0)


def walk_count_by_matrix_power(d, k):
    """Closed walks on a depth-k truncated tree by repeated multiplication."""
    from regspec.graphs import adjacency_matrix, build_truncated_tree

    A = adjacency_matrix(build_truncated_tree(d, max(k // 2 + 1, 1))).toarray().astype(object)
    v = np.zeros(A.shape[0], dtype=object)
    v[0] = 1
    for _ in range(k):
        v = A.dot(v)
    return int(v[0])


@pytest.mark.parametrize("d", DEGREES)
def test_km_density_matches_textbook_form(d):
    m = kesten_mckay(d)
    lam = np.linspace(-m.w0 * 1.1, m.w0 * 1.1, 4001)
    assert np.allclose(m.density(lam), km_density_textbook(lam, d), atol=1e-13)


@pytest.mark.parametrize("m", [kesten_mckay(3), kesten_mckay(8), rescaled_km(3), rescaled_km(10), semicircle()], ids=str)
def test_total_mass_is_one(m):
    assert float(mp.quad(lambda t: float(m.density(float(t))), [-m.w0, 0, m.w0])) == pytest.approx(1.0, abs=1e-10)
    assert analytic_cdf(m, m.w0) == 1.0 and analytic_cdf(m, -m.w0) == 0.0


@pytest.mark.parametrize("m", [kesten_mckay(3), rescaled_km(5), semicircle()], ids=str)
def test_fast_cdf_agrees_with_adaptive_cdf(m):
    t = np.linspace(-m.w0, m.w0, 101)
    assert np.max(np.abs(m.cdf(t) - analytic_cdf(m, t))) < 1e-10


def test_semicircle_cdf_closed_form():
    t = np.linspace(-1, 1, 201)
    assert np.max(np.abs(semicircle().cdf(t) - semicircle_cdf(t))) < 1e-12
    assert semicircle().density(0.0) == pytest.approx(2 / math.pi)


@pytest.mark.parametrize("d", DEGREES)
def test_rescaling_identity(d):
    km, r = kesten_mckay(d), rescaled_km(d)
    w = 2 * math.sqrt(d - 1)
    t = np.linspace(-1, 1, 41)
    assert np.allclose(r.cdf(t), km.cdf(w * t), atol=1e-12)
    assert np.allclose(r.density(t[1:-1]), w * km.density(w * t[1:-1]), rtol=1e-12)


@pytest.mark.parametrize("d", DEGREES)
def test_density_bounds_hold_and_are_nearly_attained(d):
    km, r = kesten_mckay(d), rescaled_km(d)
    peak = km.density(km.grid(200001)).max()
    assert peak <= gamma_d(d) * (1 + 1e-12)
    assert r.density(r.grid(200001)).max() <= gamma_tilde_d(d) * (1 + 1e-12)
    if d > 6:
        assert peak == pytest.approx(gamma_d(d), rel=1e-3)


@pytest.mark.parametrize("d,k", [(d, k) for d in (3, 4, 7) for k in range(0, 13)])
def test_km_moments_count_closed_walks(d, k):
    assert quad_moment(kesten_mckay(d), k) == pytest.approx(tree_moment(d, k), rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("d,k", [(3, 6), (3, 10), (4, 8), (5, 6)])
def test_tree_moment_against_matrix_power(d, k):
    assert tree_moment(d, k) == walk_count_by_matrix_power(d, k)


def test_tree_moment_small_values():
    assert [tree_moment(3, k) for k in range(0, 7, 2)] == [1, 3, 15, 87]
    with pytest.raises(InvalidParametersError):
        tree_moment(3, 31)


@settings(max_examples=30, deadline=None)
@given(d=st.sampled_from(DEGREES), x=st.floats(-6, 6), y=st.floats(0.02, 5))
def test_gamma_tree_is_the_km_transform(d, x, y):
    z = complex(x, y)
    assert abs(gamma_tree(z, d) - stieltjes_numeric(kesten_mckay(d), z)) < 1e-7


@settings(max_examples=30, deadline=None)
@given(x=st.floats(-3, 3), y=st.floats(0.02, 5))
def test_gamma_sc_is_the_semicircle_transform(x, y):
    z = complex(x, y)
    assert abs(gamma_sc(z) - stieltjes_numeric(semicircle(), z)) < 1e-7


def test_gamma_tree_known_values():
    # d=3, z=i: ((d-2) i - d sqrt(-1-8)) / (2 (-1-9)) = (i - 9i) / -20 = 0.4 i
    assert gamma_tree(1j, 3) == pytest.approx(0.4j, abs=1e-15)
    assert gamma_branch(1j, 3) == pytest.approx(0.5j, abs=1e-15)
    # the sign-flipped variant equals the branch value here, not the vertex value
    assert gamma_tree_sign_flipped(1j, 3) == pytest.approx(0.5j, abs=1e-15)


@pytest.mark.parametrize("d", [3, 5, 9])
def test_gamma_tree_vertex_branch_relation(d):
    z = np.array([0.3 + 0.1j, -2 + 1j, 5 + 0.01j])
    assert np.allclose(gamma_tree(z, d), -1 / (z + d * gamma_branch(z, d)), atol=1e-13)
    assert np.allclose(gamma_branch(z, d), -1 / (z + (d - 1) * gamma_branch(z, d)), atol=1e-13)


@settings(max_examples=40, deadline=None)
@given(d=st.sampled_from(DEGREES), x=st.floats(-20, 20), y=st.floats(1e-6, 20))
def test_transforms_map_to_upper_half_plane(d, x, y):
    z = complex(x, y)
    for g in (gamma_tree(z, d), gamma_branch(z, d), gamma_sc(z)):
        assert g.imag > 0
        assert abs(g) <= 1 / y + 1e-12


def test_asymptotics_at_large_z():
    z = 1e6j
    assert gamma_tree(z, 4) * z == pytest.approx(-1, rel=1e-6)
    assert gamma_sc(z) * z == pytest.approx(-1, rel=1e-6)
    # the sign-flipped variant is not a probability transform
    assert gamma_tree_sign_flipped(z, 4) * z == pytest.approx(-3, rel=1e-6)
    assert gamma_sc_paper(z) * z == pytest.approx(-1, rel=1e-6)


def test_transforms_reject_real_z():
    with pytest.raises(InvalidParametersError):
        gamma_tree(1.0 + 0j, 3)
    with pytest.raises(InvalidParametersError):
        stieltjes_numeric(semicircle(), 0.5)


def test_measure_lookup_and_density_table():
    assert measure_from_name("km", 3) is kesten_mckay(3)
    assert measure_from_name("SC") is semicircle()
    with pytest.raises(InvalidParametersError):
        measure_from_name("km")
    with pytest.raises(InvalidParametersError):
        measure_from_name("foo", 3)
    with pytest.raises(InvalidParametersError):
        kesten_mckay(2)
    lam, dens, cdf = density_table(semicircle(), 11, exact=True)
    assert lam[0] == -1 and cdf[-1] == 1.0 and np.all(np.diff(cdf) >= 0)
