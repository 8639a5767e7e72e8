import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from regspec.errors import DepthTooSmallError, InvalidParametersError
from regspec.graphs import RegularGraph, adjacency_matrix, build_truncated_tree, sample_regular_graph
from regspec.measures import tree_moment
from regspec.spectral import (
    DiscreteMeasure,
    eig_sym,
    eigenvalue_count,
    format_eigenvalues_csv,
    kolmogorov_distance,
    kolmogorov_distance_discrete,
    local_moment,
    local_spectral_measure,
    local_weights,
    parse_eigenvalues_csv,
    symmetric_matrix,
)

finite = st.floats(-5, 5, allow_nan=False, allow_infinity=False)


def k4():
    return RegularGraph(4, 3, np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]]))


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (12, 12), elements=finite))
def test_eig_sym_invariants(m):
    a = m + m.T
    dec = eig_sym(a)
    assert np.all(np.diff(dec.eigenvalues) >= 0)
    assert np.allclose(dec.eigenvectors.T @ dec.eigenvectors, np.eye(12), atol=1e-10)
    assert np.allclose(a @ dec.eigenvectors, dec.eigenvectors * dec.eigenvalues, atol=1e-9)


def test_eig_sym_rejects_bad_input():
    with pytest.raises(InvalidParametersError):
        eig_sym(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(InvalidParametersError):
        eig_sym(np.array([[np.nan]]))


def test_sparse_input_matches_dense():
    g = sample_regular_graph(60, 3, 2)
    a = eig_sym(adjacency_matrix(g))
    b = eig_sym(adjacency_matrix(g).toarray())
    assert np.allclose(a.eigenvalues, b.eigenvalues, atol=1e-12)


def test_k4_local_measure_is_basis_free():
    # eigenvalue -1 has multiplicity 3; the local weight there is 3/4
    dec = eig_sym(adjacency_matrix(k4()))
    for x in range(4):
        mu = local_spectral_measure(dec, x)
        assert np.allclose(mu.atoms, [-1, 3])
        assert np.allclose(mu.weights, [0.75, 0.25], atol=1e-12)
    atoms, w = local_weights(dec)
    assert np.allclose(atoms, [-1, 3]) and np.allclose(w, [[0.75, 0.25]] * 4)


def test_local_weights_rows_sum_to_one():
    dec = eig_sym(adjacency_matrix(sample_regular_graph(200, 3, 1)))
    _, w = local_weights(dec)
    assert np.allclose(w.sum(axis=1), 1.0, atol=1e-12)


def _grid_distance(m, F):
    """Brute force: sup over atoms (both sides) and a dense grid."""
    t = np.concatenate([np.linspace(-8, 8, 20001), m.atoms, np.nextafter(m.atoms, -np.inf)])
    return np.max(np.abs(m.cdf(t) - F(t)))


def uniform_cdf(t):
    return np.clip((np.asarray(t) + 1) / 2, 0.0, 1.0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-2, 2), st.floats(0.01, 1)), min_size=1, max_size=15))
def test_kolmogorov_distance_against_brute_force(pts):
    p = np.array([a for a, _ in pts])
    w = np.array([b for _, b in pts])
    m = DiscreteMeasure.from_points(p, w / w.sum())
    exact = kolmogorov_distance(m, uniform_cdf)
    brute = _grid_distance(m, uniform_cdf)
    assert exact >= brute - 1e-12
    assert exact <= brute + 1e-3


@settings(max_examples=40, deadline=None)
@given(*(st.lists(st.tuples(st.floats(-2, 2), st.floats(0.01, 1)), min_size=1, max_size=10) for _ in range(3)))
def test_discrete_distance_is_a_metric(a, b, c):
    def meas(pts):
        w = np.array([v for _, v in pts])
        return DiscreteMeasure.from_points([u for u, _ in pts], w / w.sum())

    x, y, z = meas(a), meas(b), meas(c)
    dxy = kolmogorov_distance_discrete(x, y)
    assert dxy == pytest.approx(kolmogorov_distance_discrete(y, x))
    assert kolmogorov_distance_discrete(x, x) == 0
    assert dxy <= kolmogorov_distance_discrete(x, z) + kolmogorov_distance_discrete(z, y) + 1e-12


def test_discrete_distance_one_sided_jump():
    a = DiscreteMeasure.from_points([0.0], [1.0])
    b = DiscreteMeasure.from_points([0.0, 1.0], [0.5, 0.5])
    assert kolmogorov_distance_discrete(a, b) == pytest.approx(0.5)


def test_cdf_is_right_continuous_and_intervals_half_open():
    m = DiscreteMeasure.from_points([0.0, 1.0], [0.25, 0.75])
    assert m.cdf(0.0) == 0.25 and m.cdf_left(0.0) == 0.0
    assert m.interval_mass(0.0, 1.0) == 0.75
    dec = eig_sym(np.diag([0.0, 1.0, 2.0]))
    assert eigenvalue_count(dec, (0.0, 1.0)) == 1
    assert eigenvalue_count(dec, (-1.0, 2.0)) == 3


def test_from_points_merges_close_atoms():
    m = DiscreteMeasure.from_points([1.0, 1.0 + 1e-12, 2.0], [0.2, 0.3, 0.5], merge_tol=1e-9)
    assert m.atoms.size == 2 and m.weights[0] == pytest.approx(0.5)
    with pytest.raises(InvalidParametersError):
        DiscreteMeasure([1.0, 0.0], [0.5, 0.5])
    with pytest.raises(InvalidParametersError):
        DiscreteMeasure([0.0], [-1.0])


@pytest.mark.parametrize("k", range(0, 9))
def test_local_moment_on_tree_equals_closed_walk_count(k):
    t = build_truncated_tree(3, 6)
    assert local_moment(t, None, 0, k) == tree_moment(3, k)


def test_local_moment_matches_matrix_power_with_potential():
    g = sample_regular_graph(40, 3, 4)
    v = np.random.default_rng(0).uniform(-1, 1, 40)
    h = symmetric_matrix(g, v)
    hk = np.eye(40)
    for k in range(8):
        assert local_moment(g, v, 5, k) == pytest.approx(hk[5, 5], rel=1e-12, abs=1e-12)
        hk = hk @ h


def test_local_moment_requires_depth():
    t = build_truncated_tree(3, 3)
    with pytest.raises(DepthTooSmallError):
        local_moment(t, None, 0, 6)


def test_csv_roundtrip_is_exact():
    vals = np.random.default_rng(1).normal(size=50)
    assert np.array_equal(parse_eigenvalues_csv(format_eigenvalues_csv(vals)), vals)


def test_measure_json_roundtrip():
    m = DiscreteMeasure.from_points([0.1, -0.3], [0.4, 0.6])
    m2 = DiscreteMeasure.from_json(m.to_json())
    assert np.array_equal(m.atoms, m2.atoms) and np.array_equal(m.weights, m2.weights)
