import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import literal_penalty
from trexnn.dataset import validate_and_standardize
from trexnn.forward import DummyConfig, ExperimentEnsemble, ForwardPath, run_experiments
from trexnn.occurrence import (
    NeighbourIndex,
    correlation_matrix,
    nn_groups,
    nn_occurrences,
    nn_penalties,
    occurrence_profile,
    relative_occurrences,
    rho_grid,
)


def _ensemble_from_orders(orders, p, L):
    paths = [ForwardPath(order=o, p=p, L=L, T_stop=L) for o in orders]
    return ExperimentEnsemble(paths=paths, p=p, L=L, seed=0, T_max=L)


def test_relative_occurrence_counting():
    # variable 0 in 3 of 4 candidate sets at T=1, variable 1 in all
    ens = _ensemble_from_orders([[0, 1, 2], [1, 0, 2], [1, 2, 0], [0, 1, 2]], p=2, L=1)
    np.testing.assert_array_equal(relative_occurrences(ens, 0), [0.0, 0.0])
    np.testing.assert_array_equal(relative_occurrences(ens, 1), [0.75, 1.0])
    with pytest.raises(ValueError):
        relative_occurrences(ens, 2)


def test_relative_occurrence_monotone_in_T_and_multiple_of_1_over_K():
    rng = np.random.default_rng(0)
    ds = validate_and_standardize(rng.standard_normal((30, 10)), rng.standard_normal(30))
    ens = run_experiments(ds, DummyConfig(K=7, L=10, seed=1), T_max=6)
    prev = np.zeros(10)
    for T in range(1, 7):
        phi = relative_occurrences(ens, T)
        assert np.all(phi >= prev)
        np.testing.assert_allclose(phi * 7, np.round(phi * 7), atol=1e-12)
        prev = phi


def test_groups_vacuous_threshold():
    corr = correlation_matrix(np.random.default_rng(1).standard_normal((20, 5)))
    g = nn_groups(corr, 0.0)
    for j in range(5):
        assert g[j] == frozenset(range(5)) - {j}


def test_duplicated_columns_group_at_one():
    rng = np.random.default_rng(2)
    X = rng.standard_normal((25, 4))
    X[:, 3] = X[:, 1]
    g = nn_groups(correlation_matrix(X), 1.0)
    assert g[1] == {3} and g[3] == {1}
    assert g[0] == frozenset() and g[2] == frozenset()


def test_noise_columns_empty_at_one():
    g = nn_groups(correlation_matrix(np.random.default_rng(3).standard_normal((50, 6))), 1.0)
    assert all(not g[j] for j in range(6))


def test_group_invariants():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((30, 8)) + rng.standard_normal((30, 1))
    corr = correlation_matrix(X)
    prev = None
    for rho in rho_grid(0.05):
        g = nn_groups(corr, rho)
        for j in range(8):
            assert j not in g[j]
            for q in g[j]:
                assert j in g[q]
            if prev is not None:
                assert g[j] <= prev[j]
        prev = g


def test_groups_reject_bad_input():
    with pytest.raises(ValueError):
        nn_groups(np.array([[1.0, np.nan], [np.nan, 1.0]]), 0.5)
    with pytest.raises(ValueError):
        nn_groups(np.eye(2), 1.5)


def test_boundary_tie_included():
    corr = np.array([[1.0, 0.5], [0.5, 1.0]])
    assert nn_groups(corr, 0.5)[0] == {1}


def test_penalty_examples():
    corr = np.array([[1.0, 0.9, 0.0], [0.9, 1.0, 0.0], [0.0, 0.0, 1.0]])
    g = nn_groups(corr, 0.5)
    np.testing.assert_array_equal(nn_penalties(np.array([1.0, 0.0, 0.3]), g), [1.0, 1.0, 0.5])
    np.testing.assert_array_equal(nn_penalties(np.array([0.4, 0.4, 0.3]), g), [0.5, 0.5, 0.5])


def test_nn_occurrence_examples():
    np.testing.assert_array_equal(nn_occurrences(np.array([0.0, 0.7, 0.8]), np.array([0.9, 1.0, 0.5])), [0.0, 0.7, 0.4])
    with pytest.raises(ValueError):
        nn_occurrences(np.zeros(2), np.zeros(3))


def test_profile_fields():
    corr = np.eye(3)
    prof = occurrence_profile(np.array([0.5, 1.0, 0.0]), nn_groups(corr, 0.3), T=2, L=4)
    assert (prof.T, prof.L, prof.rho_thr) == (2, 4, 0.3)
    np.testing.assert_array_equal(prof.phi_nn, prof.psi * prof.phi)


def test_rho_grid():
    g = rho_grid()
    assert g.size == 101 and g[0] == 0.0 and g[-1] == 1.0 and g[37] == 0.37
    with pytest.raises(ValueError):
        rho_grid(0.03)


@settings(max_examples=80, deadline=None)
@given(
    st.integers(2, 9).flatmap(
        lambda p: st.tuples(
            st.just(p),
            st.lists(st.integers(0, 10), min_size=p, max_size=p),
            st.integers(0, 2**32 - 1),
        )
    )
)
def test_penalty_properties(args):
    p, counts, seed = args
    phi = np.asarray(counts, float) / 10
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((12, p)) + rng.uniform(0, 2) * rng.standard_normal((12, 1))
    corr = correlation_matrix(X)
    rhos = rho_grid(0.05)
    fast = NeighbourIndex(corr, rhos).penalties(phi)
    for i, rho in enumerate(rhos):
        psi = nn_penalties(phi, nn_groups(corr, rho))
        # vectorized grid, direct formula and literal oracle agree exactly
        np.testing.assert_array_equal(fast[i], psi)
        np.testing.assert_array_equal(psi, literal_penalty(phi, corr, rho))
        assert np.all((psi >= 0.5) & (psi <= 1.0))
        assert np.all(nn_occurrences(phi, psi) <= phi)
    # invariance to permuting variables
    perm = rng.permutation(p)
    psi = nn_penalties(phi, nn_groups(corr, 0.3))
    psi_perm = nn_penalties(phi[perm], nn_groups(corr[np.ix_(perm, perm)], 0.3))
    np.testing.assert_array_equal(psi_perm, psi[perm])
