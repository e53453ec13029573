"""Conservative FDP estimation and the joint (v, rho_thr, T, L) calibration."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .dataset import Dataset
from .forward import DummyConfig, ExperimentEnsemble, run_experiments
from .occurrence import (
    NeighbourIndex,
    OccurrenceProfile,
    correlation_matrix,
    relative_occurrences,
    rho_grid,
)

logger = logging.getLogger(__name__)

INFEASIBLE = None


@dataclass(frozen=True)
class EstimatorState:
    """Estimator values at one ``(v, rho_thr, T, L)``.

    ``zero_denominators`` counts the t-terms of ``V_hat_prime`` dropped because
    their denominator was 0; ``negative_deltas`` counts (t, j) pairs among the
    selected variables whose penalized occurrence decreased from t-1 to t.
    """

    v: float
    rho_thr: Optional[float]
    T: int
    L: int
    V_hat: float
    V_hat_prime: float
    R: int
    fdp_hat: float
    zero_denominators: int = 0
    negative_deltas: int = 0


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple
    selected_ids: tuple
    occurrences: Optional[OccurrenceProfile]
    v_star: Optional[float]


@dataclass
class CalibrationOutcome:
    """Result of :func:`calibrate`.

    When no non-empty selection satisfies ``fdp_hat <= alpha`` at any tried
    ``L``, ``feasible`` is False, the selection is empty and the starred
    parameters are ``None``.
    """

    v_star: Optional[float]
    rho_star: Optional[float]
    T_star: Optional[int]
    L_star: Optional[int]
    alpha: float
    selected: SelectionResult
    trace: List[EstimatorState] = field(default_factory=list)
    feasible: bool = True
    penalized: bool = True
    L_tried: List[int] = field(default_factory=list)

    @property
    def state(self) -> Optional[EstimatorState]:
        for s in self.trace:
            if (s.v, s.rho_thr, s.T, s.L) == (self.v_star, self.rho_star, self.T_star, self.L_star):
                return s
        return None


def fdp_hat(V_hat: float, R: int) -> float:
    if V_hat < 0 or R < 0:
        raise ValueError("V_hat and R must be nonnegative")
    return V_hat / max(1, R)


def _stack_path(profiles: Sequence[OccurrenceProfile]) -> Tuple[np.ndarray, int, Optional[float]]:
    if not profiles:
        raise ValueError("need at least one profile (t = 1)")
    L = profiles[0].L
    rho = profiles[0].rho_thr
    for t, pr in enumerate(profiles, start=1):
        if pr.L != L or not _same_rho(pr.rho_thr, rho):
            raise ValueError("profiles must share (rho_thr, L)")
        if pr.T != t:
            raise ValueError(f"profile {t} has T={pr.T}; expected consecutive T = 1..T")
    p = profiles[0].phi_nn.shape[0]
    path = np.vstack([np.zeros(p)] + [pr.phi_nn for pr in profiles])
    return path, L, rho


def _same_rho(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return a == b


def v_hat_terms(path: np.ndarray, L: int, v: float):
    """Evaluate ``(V_hat, V_hat_prime, R, zero_denominators, negative_deltas)``.

    ``path`` is the ``(T + 1) x p`` array of penalized occurrences for
    ``t = 0..T`` (row 0 all zeros).
    """
    T = path.shape[0] - 1
    p = path.shape[1]
    final = path[-1]
    sel = final > v
    sel_half = final > 0.5
    delta = np.diff(path, axis=0)
    num = delta[:, sel].sum(axis=1)
    den = delta[:, sel_half].sum(axis=1)
    coef = (p - path[1:].sum(axis=1)) / (L - np.arange(T))
    zero = den == 0
    ratio = np.divide(num, den, out=np.zeros(T), where=~zero)
    V_prime = float((coef * ratio).sum())
    V = float((1.0 - final[sel]).sum()) + V_prime
    neg = int((delta[:, sel] < 0).sum())
    return V, V_prime, int(sel.sum()), int(zero.sum()), neg


def v_hat(profiles: Sequence[OccurrenceProfile], v: float) -> Tuple[float, float]:
    """Estimated number of selected null variables and its path term.

    ``profiles`` holds the occurrence profiles for ``t = 1..T`` at a fixed
    ``(rho_thr, L)``; the selected set is taken from the last one.

    Returns
    -------
    V_hat, V_hat_prime : float
    """
    path, L, _ = _stack_path(profiles)
    V, Vp, _, _, _ = v_hat_terms(path, L, v)
    return V, Vp


def estimator_state(profiles: Sequence[OccurrenceProfile], v: float) -> EstimatorState:
    path, L, rho = _stack_path(profiles)
    V, Vp, R, zero, neg = v_hat_terms(path, L, v)
    return EstimatorState(
        v=float(v), rho_thr=rho, T=len(profiles), L=L, V_hat=V, V_hat_prime=Vp, R=R,
        fdp_hat=V / max(1, R), zero_denominators=zero, negative_deltas=neg,
    )


def voting_grid(final: np.ndarray) -> np.ndarray:
    """0.5 together with every distinct penalized occurrence in ``[0.5, 1)``."""
    vals = final[(final >= 0.5) & (final < 1.0)]
    return np.unique(np.concatenate([[0.5], vals]))


def fdp_curve(path: np.ndarray, L: int, v_grid: np.ndarray):
    """Vectorized estimator over a voting grid.

    Returns arrays ``(fdp, V_hat, V_hat_prime, R)`` aligned with ``v_grid``.
    Agrees with :func:`v_hat_terms` up to summation order.
    """
    T = path.shape[0] - 1
    p = path.shape[1]
    final = path[-1]
    order = np.argsort(-final, kind="stable")
    fs = final[order]
    delta = np.diff(path, axis=0)[:, order]
    coef = (p - path[1:].sum(axis=1)) / (L - np.arange(T))
    cum_first = np.concatenate([[0.0], np.cumsum(1.0 - fs)])
    cum_delta = np.hstack([np.zeros((T, 1)), np.cumsum(delta, axis=1)])
    # R(v) = number of sorted values strictly greater than v
    R = np.searchsorted(-fs, -np.asarray(v_grid), side="left")
    R_half = int(np.searchsorted(-fs, -0.5, side="left"))
    den = cum_delta[:, R_half]
    zero = den == 0
    num = cum_delta[:, R]  # (T, n_v)
    ratio = np.divide(num, den[:, None], out=np.zeros_like(num), where=~zero[:, None])
    Vp = coef @ ratio
    V = cum_first[R] + Vp
    return V / np.maximum(1, R), V, Vp, R


def pick_v(profiles, alpha: float, v_grid: Optional[Sequence[float]] = None):
    """Smallest ``v`` in ``v_grid`` with ``fdp_hat(v) <= alpha``, else ``INFEASIBLE`` (None).

    Without ``v_grid`` the grid of :func:`voting_grid` on the last profile is used.
    """
    path, L, _ = _stack_path(profiles)
    if v_grid is None:
        v_grid = voting_grid(path[-1])
    v_grid = np.asarray(v_grid, dtype=float)
    if v_grid.size == 0:
        raise ValueError("v_grid must be non-empty")
    for v in np.sort(v_grid):
        V, _, R, _, _ = v_hat_terms(path, L, v)
        if V / max(1, R) <= alpha:
            return float(v)
    return INFEASIBLE


class _GridEvaluator:
    """Penalized occurrence paths for every rho on the grid at one ``L``."""

    def __init__(self, p: int, L: int, nbr: Optional[NeighbourIndex], rhos):
        self.p = p
        self.L = L
        self.nbr = nbr
        self.rhos = list(rhos)
        self.phi = [np.zeros(p)]
        self.paths = [[np.zeros(p)] for _ in self.rhos]
        self.psi_last = None

    def push(self, phi: np.ndarray) -> None:
        self.phi.append(phi)
        if self.nbr is None:
            psi = np.ones((1, self.p))
        else:
            psi = self.nbr.penalties(phi)
        self.psi_last = psi
        nn = psi * phi
        for i in range(len(self.rhos)):
            self.paths[i].append(nn[i])

    def path(self, i: int) -> np.ndarray:
        return np.vstack(self.paths[i])


def _ensemble(dataset, cfg, T_max, L, stream, n_jobs) -> ExperimentEnsemble:
    return run_experiments(dataset, cfg, T_max=T_max, L=L, stream=stream, n_jobs=n_jobs)


def calibrate(
    dataset: Dataset,
    alpha: float,
    cfg: DummyConfig = DummyConfig(),
    *,
    rho_step: float = 0.01,
    L_cap_factor: int = 4,
    penalize: bool = True,
    T_cap: Optional[int] = None,
    n_jobs: Optional[int] = None,
) -> CalibrationOutcome:
    """Jointly choose ``(v, rho_thr, T, L)`` so the FDP estimate stays below ``alpha``.

    Starting from ``L = cfg.L`` (``p`` if unset), ``T`` grows from 1 and for
    every ``rho_thr`` on the grid the smallest feasible voting threshold is
    found. Among feasible tuples the one selecting the most variables wins
    (ties: smaller ``T``, larger ``rho_thr``, smaller ``v``). ``T`` stops
    growing once every rho with a non-empty selection at ``v = 0.5`` has an
    estimate above ``alpha``, at ``T = L`` or when all paths are exhausted.
    If nothing non-empty is feasible, ``L`` is doubled (fresh dummies) up to
    ``L_cap_factor`` times its initial value.

    With ``penalize=False`` this is the plain T-Rex calibration over
    ``(v, T, L)`` (penalty factor fixed to 1, ``rho_thr`` reported as None).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    p = dataset.p
    L0 = cfg.L if cfg.L is not None else p
    L_cap = L_cap_factor * L0
    if penalize:
        rhos = rho_grid(rho_step)
        nbr = NeighbourIndex(correlation_matrix(dataset.X), rhos)
        rho_values = [float(r) for r in rhos]
    else:
        nbr = None
        rho_values = [None]

    trace: List[EstimatorState] = []
    L_tried: List[int] = []
    L = L0
    stream = 0
    while True:
        L_tried.append(L)
        best = _search_at_L(dataset, alpha, cfg, L, stream, nbr, rho_values, T_cap, n_jobs, trace)
        if best is not None:
            key, state, profile = best
            sel = tuple(int(j) for j in np.flatnonzero(profile.phi_nn > state.v))
            return CalibrationOutcome(
                v_star=state.v, rho_star=state.rho_thr, T_star=state.T, L_star=L, alpha=alpha,
                selected=SelectionResult(sel, tuple(dataset.ids_of(sel)), profile, state.v),
                trace=trace, feasible=True, penalized=penalize, L_tried=L_tried,
            )
        if 2 * L > L_cap:
            break
        L *= 2
        stream += 1
        logger.info("no feasible non-empty selection; doubling L to %d", L)

    return CalibrationOutcome(
        v_star=None, rho_star=None, T_star=None, L_star=None, alpha=alpha,
        selected=SelectionResult((), (), None, None),
        trace=trace, feasible=False, penalized=penalize, L_tried=L_tried,
    )


def _search_at_L(dataset, alpha, cfg, L, stream, nbr, rho_values, T_cap, n_jobs, trace):
    p = dataset.p
    T_limit = L if T_cap is None else min(L, T_cap)
    chunk = min(T_limit, 4)
    ens = _ensemble(dataset, cfg, chunk, L, stream, n_jobs)
    grid = _GridEvaluator(p, L, nbr, rho_values)
    best = None
    T = 0
    while T < T_limit:
        T += 1
        if T > ens.T_max:
            if ens.exhausted:
                break
            ens = _ensemble(dataset, cfg, min(T_limit, 2 * ens.T_max), L, stream, n_jobs)
        phi = relative_occurrences(ens, T)
        grid.push(phi)
        open_rho = False
        any_selection = False
        for i, rho in enumerate(rho_values):
            path = grid.path(i)
            final = path[-1]
            vs = voting_grid(final)
            fdp, V, Vp, R = fdp_curve(path, L, vs)
            ok = np.flatnonzero(fdp <= alpha)
            # infeasible cells are traced at v = 0.5
            k = int(ok[0]) if ok.size else 0
            state = EstimatorState(
                v=float(vs[k]), rho_thr=rho, T=T, L=L, V_hat=float(V[k]),
                V_hat_prime=float(Vp[k]), R=int(R[k]), fdp_hat=float(fdp[k]),
            )
            trace.append(state)
            if ok.size:
                if state.R > 0:
                    key = (-state.R, T, -(rho if rho is not None else 0.0), state.v)
                    if best is None or key < best[0]:
                        psi = grid.psi_last[i]
                        profile = OccurrenceProfile(T=T, L=L, rho_thr=rho, phi=phi, psi=psi, phi_nn=final)
                        best = (key, state, profile)
            # v = 0.5 is always the first grid value
            if R[0] > 0:
                any_selection = True
                if fdp[0] <= alpha:
                    open_rho = True
        if any_selection and not open_rho:
            break
        # past the last dummy of every exhausted path nothing changes any more
        if ens.exhausted and T > max(pth.num_dummies for pth in ens.paths):
            break
    return best
