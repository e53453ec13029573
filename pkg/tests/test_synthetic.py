import numpy as np
import pytest

from trexnn.forward import DummyConfig, run_experiments
from trexnn.occurrence import correlation_matrix, nn_groups, nn_penalties, relative_occurrences
from trexnn.synthetic import (
    SynthConfig,
    TRexSelector,
    active_indices,
    block_covariance,
    blocks,
    empirical_fdr_tpr,
    generate,
    select_everything,
    select_nothing,
)


def _raw_corr(ds):
    return correlation_matrix(ds.X)


def test_blocks_cover_and_overlap():
    bl = blocks(100, 10, 3)
    assert bl[0] == range(0, 10) and bl[1] == range(7, 17) and bl[-1].stop == 100
    for a, b in zip(bl[:-1], bl[1:]):
        assert len(set(a) & set(b)) == 3 or b.stop == 100


def test_within_block_correlation_exact():
    S = block_covariance(40, 10, 3, 0.8)
    np.testing.assert_allclose(np.diag(S), 1.0, atol=1e-12)
    for b in blocks(40, 10, 3):
        idx = np.asarray(b)
        sub = S[np.ix_(idx, idx)]
        off = sub[~np.eye(idx.size, dtype=bool)]
        np.testing.assert_allclose(off, 0.8, atol=1e-10)
    assert np.linalg.eigvalsh(S)[0] > 0


def test_singular_blocks_rejected():
    with pytest.raises(ValueError, match="not positive definite"):
        block_covariance(20, 10, 3, 1.0)


def test_independent_design():
    cfg = SynthConfig(n=400, p=30, num_active=3, rho_within=0.0, seed=1)
    ds, _, _ = generate(cfg)
    C = _raw_corr(ds)
    off = np.abs(C[~np.eye(30, dtype=bool)])
    assert off.max() <= 4 / np.sqrt(cfg.n)


def test_shared_columns_correlate_with_both_blocks():
    cfg = SynthConfig(n=2000, p=40, seed=2)
    ds, _, _ = generate(cfg)
    C = _raw_corr(ds)
    bl = blocks(40, 10, 3)
    tol = 4 / np.sqrt(cfg.n)
    for a, b in zip(bl[:-1], bl[1:]):
        for j in set(a) & set(b):
            for q in (set(a) | set(b)) - {j}:
                assert C[j, q] >= cfg.rho_within - tol


def test_noiseless_single_active():
    ds, act, w = generate(SynthConfig(n=50, p=20, num_active=1, noise_sd=0.0, seed=3))
    (j,) = act
    ratio = ds.y / ds.X[:, j]
    np.testing.assert_allclose(ratio, ratio[0], rtol=1e-10)
    assert np.count_nonzero(w) == 1


def test_actives_spread_over_blocks():
    cfg = SynthConfig()
    act = active_indices(cfg, np.random.default_rng(0))
    assert len(act) == 10 and len(set(act)) == 10
    bl = blocks(cfg.p, cfg.block_size, cfg.block_overlap)
    owner = [[i for i, b in enumerate(bl) if j in b] for j in act]
    assert all(len(o) == 1 for o in owner)  # no active on a shared column
    assert len({o[0] for o in owner}) == 10


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(num_active=200)
    with pytest.raises(ValueError):
        SynthConfig(block_overlap=10)
    with pytest.raises(ValueError):
        SynthConfig(rho_within=1.0)


def test_trivial_selectors():
    cfg = SynthConfig(n=60, p=50, num_active=5, seed=4)
    rep = empirical_fdr_tpr(cfg, 0.1, 5, select_nothing)
    assert (rep.empirical_fdr, rep.empirical_tpr) == (0.0, 0.0)
    rep = empirical_fdr_tpr(cfg, 0.1, 5, select_everything)
    assert rep.empirical_fdr == pytest.approx(0.9) and rep.empirical_tpr == 1.0
    assert rep.fdr_se == 0.0 and len(rep.per_run) == 5
    with pytest.raises(ValueError):
        empirical_fdr_tpr(cfg, 0.1, 1, select_nothing)


def _flaky(dataset, seed):
    if seed % 2:
        raise RuntimeError("boom")
    return ()


def test_failed_runs_counted():
    rep = empirical_fdr_tpr(SynthConfig(n=30, p=10, num_active=2, seed=5), 0.1, 8, _flaky)
    assert rep.failed_runs + rep.runs == 8 and rep.failed_runs > 0
    assert all("boom" in f for f in rep.failures)


def test_reproducible_and_parallel_invariant():
    cfg = SynthConfig(n=60, p=30, num_active=3, seed=6)
    sel = TRexSelector(alpha=0.3, K=5, rho_step=0.1)
    a = empirical_fdr_tpr(cfg, 0.3, 4, sel, n_jobs=1)
    b = empirical_fdr_tpr(cfg, 0.3, 4, sel, n_jobs=2)
    assert a.per_run == b.per_run
    assert a.empirical_fdr == np.mean([r.fdp for r in a.per_run])


def test_penalized_never_superset_at_half():
    cfg = SynthConfig(seed=7)
    for r in range(5):
        ds, _, _ = generate(cfg.with_seed(r))
        ens = run_experiments(ds, DummyConfig(K=20, seed=r), T_max=3)
        corr = correlation_matrix(ds.X)
        for T in (1, 2, 3):
            phi = relative_occurrences(ens, T)
            for rho in (0.3, 0.6, 0.9):
                nn = nn_penalties(phi, nn_groups(corr, rho)) * phi
                assert set(np.flatnonzero(nn > 0.5)) <= set(np.flatnonzero(phi > 0.5))
