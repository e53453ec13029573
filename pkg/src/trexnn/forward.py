"""Dummy-augmented, early-terminated LARS and the ensemble of random experiments."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.linalg import solve_triangular

from .dataset import Dataset
from .parallel import parallel_map

logger = logging.getLogger(__name__)

# relative tolerance for "no correlation left" and for rank deficiency
_EPS = 1e-10


class RankDeficiencyWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class DummyConfig:
    """Number of random experiments ``K``, dummies per experiment ``L`` and seed.

    ``L=None`` lets :func:`trexnn.calibration.calibrate` choose ``L = p``.
    """

    K: int = 20
    L: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.K < 2:
            raise ValueError(f"K must be >= 2, got {self.K}")
        if self.L is not None and self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")


def experiment_rng(seed: int, k: int, stream: int = 0) -> np.random.Generator:
    """Private generator of experiment ``k``; ``stream`` separates reruns."""
    ss = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=(int(stream), int(k)))
    return np.random.default_rng(ss)


def generate_dummies(n: int, L: int, rng) -> np.ndarray:
    """i.i.d. standard normal ``n x L`` dummy matrix.

    ``rng`` is a :class:`numpy.random.Generator` or an integer seed.
    """
    if n < 2:
        raise ValueError(f"need n >= 2 samples, got {n}")
    if L < 1:
        raise ValueError(f"need L >= 1 dummies, got {L}")
    rng = np.random.default_rng(rng)
    return rng.standard_normal((n, L))


@dataclass
class ForwardPath:
    """Inclusion sequence of one experiment.

    ``order`` holds column indices of the augmented matrix ``[X dummies]``:
    values ``< p`` are original variables, values ``>= p`` are dummies.
    """

    order: List[int]
    p: int
    L: int
    T_stop: int
    exhausted: bool = False
    dropped: List[int] = field(default_factory=list)

    def is_dummy(self, idx: int) -> bool:
        return idx >= self.p

    @property
    def num_dummies(self) -> int:
        return sum(1 for j in self.order if j >= self.p)

    def candidate_set(self, T: int) -> frozenset:
        """Original variables included before the ``T``-th dummy entered.

        When the path ran out before ``T`` dummies entered, every original
        variable on the path is returned.
        """
        out = []
        seen = 0
        if T <= 0:
            return frozenset()
        for j in self.order:
            if j >= self.p:
                seen += 1
                if seen == T:
                    break
            else:
                out.append(j)
        return frozenset(out)


def _normalize_columns(Z: np.ndarray) -> np.ndarray:
    Z = Z - Z.mean(axis=0)
    norms = np.sqrt((Z**2).sum(axis=0))
    norms[norms == 0] = 1.0
    return Z / norms


def lars_order(Z: np.ndarray, y: np.ndarray, stop, max_steps: Optional[int] = None):
    """Run least angle regression on ``Z`` (centered, unit-norm columns).

    Parameters
    ----------
    Z : ndarray (n, m)
    y : ndarray (n,)
    stop : callable
        Called with the list of entered columns after every entry; a true
        return value terminates the path.
    max_steps : int, optional
        Hard cap on the number of entries.

    Returns
    -------
    order : list of int
        Columns in the order they first entered the active set.
    dropped : list of int
        Columns removed from candidacy because they were linearly dependent
        on the current active set.
    exhausted : bool
        True if the path ended without ``stop`` firing.
    """
    n, m = Z.shape
    r = np.asarray(y, dtype=float).copy()
    scale = max(float(np.sqrt(r @ r)), np.finfo(float).tiny)
    eligible = np.ones(m, dtype=bool)
    active: List[int] = []
    signs: List[float] = []
    dropped: List[int] = []
    R = np.zeros((0, 0))  # upper Cholesky factor of the active Gram matrix
    if max_steps is None:
        max_steps = m
    c = Z.T @ r
    C = 0.0

    while True:
        if len(active) >= n - 1:
            # centered columns span at most n - 1 dimensions
            return active, dropped, True
        if not active:
            cand = np.flatnonzero(eligible)
            if cand.size == 0:
                return active, dropped, True
            entering = int(cand[np.argmax(np.abs(c[cand]))])
            C = abs(c[entering])
            if C <= _EPS * scale:
                return active, dropped, True
        else:
            # equiangular direction for the current active set
            s = np.asarray(signs)
            g = solve_triangular(R, solve_triangular(R, s, trans="T"))
            A_A = 1.0 / np.sqrt(float(s @ g))
            u = Z[:, active] @ (A_A * g)
            a = Z.T @ u
            cand = np.flatnonzero(eligible)
            if cand.size == 0:
                return active, dropped, True
            cc, ac = c[cand], a[cand]
            with np.errstate(divide="ignore", invalid="ignore"):
                g1 = (C - cc) / (A_A - ac)
                g2 = (C + cc) / (A_A + ac)
            g1[~(g1 > 0)] = np.inf
            g2[~(g2 > 0)] = np.inf
            gam = np.minimum(g1, g2)
            pick = int(np.argmin(gam))  # ties -> lowest column index
            gamma = gam[pick]
            if not np.isfinite(gamma):
                return active, dropped, True
            r = r - gamma * u
            c = Z.T @ r
            C = C - gamma * A_A
            if C <= _EPS * scale:
                return active, dropped, True
            entering = int(cand[pick])

        z = Z[:, entering]
        if active:
            q = solve_triangular(R, Z[:, active].T @ z, trans="T")
            d2 = float(z @ z - q @ q)
        else:
            q = np.zeros(0)
            d2 = float(z @ z)
        eligible[entering] = False
        if d2 <= _EPS:
            dropped.append(entering)
            warnings.warn(
                f"column {entering} is linearly dependent on the active set; dropped",
                RankDeficiencyWarning,
                stacklevel=2,
            )
            continue
        k = len(active)
        R_new = np.zeros((k + 1, k + 1))
        R_new[:k, :k] = R
        R_new[:k, k] = q
        R_new[k, k] = np.sqrt(d2)
        R = R_new
        active.append(entering)
        signs.append(1.0 if c[entering] >= 0 else -1.0)
        if stop(active) or len(active) >= max_steps:
            return active, dropped, False


def terminated_forward_path(dataset: Dataset, dummies: np.ndarray, T_stop: int, rng=None) -> ForwardPath:
    """LARS on ``[X dummies]`` against ``y``, stopped when the ``T_stop``-th dummy enters.

    ``rng`` is accepted for interface symmetry; LARS itself is deterministic.
    """
    dummies = np.asarray(dummies, dtype=float)
    if dummies.ndim != 2 or dummies.shape[0] != dataset.n:
        raise ValueError("dummy matrix must have n rows")
    L = dummies.shape[1]
    if not 1 <= T_stop <= L:
        raise ValueError(f"T_stop must lie in [1, {L}], got {T_stop}")
    p = dataset.p
    Z = _normalize_columns(np.hstack([dataset.X, dummies]))
    count = [0]

    def stop(active):
        if active[-1] >= p:
            count[0] += 1
        return count[0] >= T_stop

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RankDeficiencyWarning)
        order, dropped, exhausted = lars_order(Z, dataset.y, stop)
    for w in caught:
        logger.warning("%s", w.message)
    return ForwardPath(order=list(order), p=p, L=L, T_stop=T_stop, exhausted=exhausted, dropped=dropped)


@dataclass
class ExperimentEnsemble:
    """Forward paths of ``K`` experiments and their candidate sets."""

    paths: List[ForwardPath]
    p: int
    L: int
    seed: int
    T_max: int
    stream: int = 0
    failures: List[str] = field(default_factory=list)

    @property
    def K(self) -> int:
        return len(self.paths)

    def candidate_sets(self, T: int) -> List[frozenset]:
        return [path.candidate_set(T) for path in self.paths]

    def membership(self, T: int) -> np.ndarray:
        """``K x p`` indicator matrix of ``j in C_k(T)``."""
        M = np.zeros((self.K, self.p), dtype=bool)
        for k, cs in enumerate(self.candidate_sets(T)):
            if cs:
                M[k, list(cs)] = True
        return M

    @property
    def exhausted(self) -> bool:
        """True when every path ended before reaching ``T_max`` dummies."""
        return all(path.exhausted for path in self.paths)


def _one_experiment(args):
    dataset, L, T_max, seed, k, stream = args
    rng = experiment_rng(seed, k, stream)
    dummies = generate_dummies(dataset.n, L, rng)
    try:
        return terminated_forward_path(dataset, dummies, T_max), None
    except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        return ForwardPath(order=[], p=dataset.p, L=L, T_stop=T_max, exhausted=True), f"experiment {k}: {exc}"


def run_experiments(
    dataset: Dataset,
    cfg: DummyConfig,
    T_max: int,
    L: Optional[int] = None,
    stream: int = 0,
    n_jobs: Optional[int] = None,
) -> ExperimentEnsemble:
    """Run ``cfg.K`` independent dummy-augmented forward selections.

    Experiment ``k`` draws its dummies from the substream ``(stream, k)`` of
    ``cfg.seed``, so results do not depend on execution order and a larger
    ``T_max`` extends (never changes) the paths.
    """
    L = cfg.L if L is None else L
    if L is None:
        L = dataset.p
    if not 1 <= T_max <= L:
        raise ValueError(f"T_max must lie in [1, L={L}], got {T_max}")
    jobs = [(dataset, L, T_max, cfg.seed, k, stream) for k in range(cfg.K)]
    results = parallel_map(_one_experiment, jobs, n_jobs=n_jobs)
    paths = [r[0] for r in results]
    failures = [r[1] for r in results if r[1] is not None]
    for msg in failures:
        logger.warning("forward selection failed: %s", msg)
    return ExperimentEnsemble(
        paths=paths, p=dataset.p, L=L, seed=cfg.seed, T_max=T_max, stream=stream, failures=failures
    )
