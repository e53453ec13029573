"""Synthetic overlapping-group regression data and Monte Carlo FDR/TPR estimation."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .dataset import Dataset, TruthReport, truth_report, validate_and_standardize
from .parallel import parallel_map

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SynthConfig:
    n: int = 150
    p: int = 100
    num_active: int = 10
    block_size: int = 10
    block_overlap: int = 3
    rho_within: float = 0.8
    coef_magnitude: float = 1.0
    noise_sd: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.p < 1:
            raise ValueError("need n >= 2 and p >= 1")
        if not 0 <= self.num_active <= self.p:
            raise ValueError("num_active must lie in [0, p]")
        if self.block_size < 1 or not 0 <= self.block_overlap < self.block_size:
            raise ValueError("need block_size >= 1 and 0 <= block_overlap < block_size")
        if not 0.0 <= self.rho_within < 1.0:
            raise ValueError("rho_within must lie in [0, 1)")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be nonnegative")

    def with_seed(self, seed: int) -> "SynthConfig":
        return SynthConfig(**{**asdict(self), "seed": int(seed)})


def blocks(p: int, block_size: int, block_overlap: int) -> List[range]:
    """Consecutive column blocks; neighbours share ``block_overlap`` columns."""
    step = block_size - block_overlap
    out = []
    start = 0
    while True:
        stop = min(start + block_size, p)
        out.append(range(start, stop))
        if stop >= p:
            return out
        start += step


def block_covariance(p: int, block_size: int, block_overlap: int, rho_within: float) -> np.ndarray:
    """Correlation matrix with equicorrelated overlapping blocks.

    Pairs inside a block have correlation ``rho_within``. Pairs that share no
    block are filled by the maximum-determinant completion: columns of
    non-adjacent blocks are conditionally independent given the shared
    columns, so dependence between blocks flows only through them. The
    blocks form a chordal (interval) pattern, for which the completed inverse
    is the sum of the inverted block matrices minus the inverted separator
    matrices.

    Raises
    ------
    ValueError
        If the result is not positive definite.
    """
    bl = blocks(p, block_size, block_overlap)
    K = np.zeros((p, p))

    def equi(m):
        return (1 - rho_within) * np.eye(m) + rho_within * np.ones((m, m))

    try:
        for b in bl:
            idx = np.asarray(b)
            K[np.ix_(idx, idx)] += np.linalg.inv(equi(idx.size))
        for b1, b2 in zip(bl[:-1], bl[1:]):
            sep = np.asarray(sorted(set(b1) & set(b2)))
            if sep.size:
                K[np.ix_(sep, sep)] -= np.linalg.inv(equi(sep.size))
        np.linalg.cholesky(K)
        S = np.linalg.inv(K)
        S = (S + S.T) / 2
        np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            f"covariance is not positive definite for rho_within={rho_within}, "
            f"block_size={block_size}, overlap={block_overlap}: {exc}"
        ) from exc
    return S


def active_indices(cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """One active variable per block, on evenly spread blocks.

    Columns shared with a neighbouring block are avoided where possible.
    """
    if cfg.num_active == 0:
        return np.zeros(0, dtype=int)
    bl = blocks(cfg.p, cfg.block_size, cfg.block_overlap)
    if cfg.num_active > len(bl):
        return np.sort(rng.choice(cfg.p, cfg.num_active, replace=False))
    picks = np.unique(np.linspace(0, len(bl) - 1, cfg.num_active).round().astype(int))
    shared = set()
    for b1, b2 in zip(bl[:-1], bl[1:]):
        shared |= set(b1) & set(b2)
    out = []
    for bi in picks:
        own = [j for j in bl[bi] if j not in shared and j not in out]
        pool = own or [j for j in bl[bi] if j not in out]
        out.append(int(rng.choice(pool)))
    return np.sort(np.asarray(out))


def generate(cfg: SynthConfig) -> Tuple[Dataset, frozenset, np.ndarray]:
    """Draw ``X`` from the overlapping-block Gaussian and ``y = X w + eps``."""
    rng = np.random.default_rng(cfg.seed)
    S = block_covariance(cfg.p, cfg.block_size, cfg.block_overlap, cfg.rho_within)
    chol = np.linalg.cholesky(S)
    X = rng.standard_normal((cfg.n, cfg.p)) @ chol.T
    act = active_indices(cfg, rng)
    w = np.zeros(cfg.p)
    w[act] = cfg.coef_magnitude * rng.choice([-1.0, 1.0], size=act.size)
    y = X @ w + cfg.noise_sd * rng.standard_normal(cfg.n)
    ds = validate_and_standardize(X, y)
    return ds, frozenset(int(j) for j in act), w


@dataclass
class BenchReport:
    runs: int
    alpha: float
    empirical_fdr: float
    empirical_tpr: float
    fdr_se: float
    tpr_se: float
    per_run: List[TruthReport] = field(default_factory=list)
    failed_runs: int = 0
    failures: List[str] = field(default_factory=list)


def run_seed(master_seed: int, run: int) -> int:
    return int(np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(run),)).generate_state(1, np.uint64)[0])


def _one_run(args):
    cfg, selector, run = args
    run_cfg = cfg.with_seed(run_seed(cfg.seed, run))
    ds, act, _ = generate(run_cfg)
    try:
        sel = selector(ds, run_seed(run_cfg.seed, 1))
    except Exception as exc:  # noqa: BLE001 - a failing run is reported, not fatal
        return run, None, f"run {run}: {type(exc).__name__}: {exc}"
    return run, truth_report(sel, act), None


def empirical_fdr_tpr(
    cfg: SynthConfig,
    alpha: float,
    runs: int,
    selector: Callable[[Dataset, int], Sequence[int]],
    n_jobs: Optional[int] = None,
) -> BenchReport:
    """Monte Carlo estimate of FDR and TPR of ``selector`` on ``cfg``.

    ``selector(dataset, seed)`` returns selected column indices. Run ``r``
    uses data seeded from ``(cfg.seed, r)`` so reports are reproducible.
    Failed runs are excluded from the averages and counted.
    """
    if runs < 2:
        raise ValueError("need at least 2 runs")
    results = parallel_map(_one_run, [(cfg, selector, r) for r in range(runs)], n_jobs=n_jobs)
    results.sort(key=lambda t: t[0])
    per_run = [rep for _, rep, _ in results if rep is not None]
    failures = [msg for _, _, msg in results if msg is not None]
    for msg in failures:
        logger.warning("selector failed: %s", msg)
    m = len(per_run)
    if m == 0:
        nan = float("nan")
        return BenchReport(runs, alpha, nan, nan, nan, nan, [], len(failures), failures)
    fdp = np.array([r.fdp for r in per_run])
    tpp = np.array([r.tpp for r in per_run])
    sd = (lambda a: float(a.std(ddof=1)) if m > 1 else 0.0)
    return BenchReport(
        runs=m,
        alpha=alpha,
        empirical_fdr=float(fdp.mean()),
        empirical_tpr=float(tpp.mean()),
        fdr_se=sd(fdp) / np.sqrt(m),
        tpr_se=sd(tpp) / np.sqrt(m),
        per_run=per_run,
        failed_runs=len(failures),
        failures=failures,
    )


@dataclass(frozen=True)
class TRexSelector:
    """Picklable selector handle running :func:`trexnn.calibration.calibrate`."""

    alpha: float
    K: int = 20
    penalize: bool = True
    rho_step: float = 0.01

    def __call__(self, dataset: Dataset, seed: int) -> tuple:
        from .calibration import calibrate
        from .forward import DummyConfig

        out = calibrate(dataset, self.alpha, DummyConfig(K=self.K, seed=seed), rho_step=self.rho_step, penalize=self.penalize)
        return out.selected.selected


def select_nothing(dataset: Dataset, seed: int) -> tuple:
    return ()


def select_everything(dataset: Dataset, seed: int) -> tuple:
    return tuple(range(dataset.p))
