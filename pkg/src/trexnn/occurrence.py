"""Relative occurrences, nearest-neighbour groups and penalized occurrences."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .forward import ExperimentEnsemble


@dataclass(frozen=True)
class GroupMap:
    """Nearest-neighbour groups ``Gr(j) = {j' != j : |corr(j, j')| >= rho_thr}``."""

    rho_thr: float
    groups: tuple  # tuple of frozensets, one per variable

    @property
    def p(self) -> int:
        return len(self.groups)

    def __getitem__(self, j: int) -> frozenset:
        return self.groups[j]


@dataclass(frozen=True)
class OccurrenceProfile:
    T: int
    L: int
    rho_thr: float
    phi: np.ndarray
    psi: np.ndarray
    phi_nn: np.ndarray


def relative_occurrences(ensemble: ExperimentEnsemble, T: int) -> np.ndarray:
    """Fraction of the ``K`` candidate sets ``C_k(T)`` containing each variable."""
    if T < 0 or T > ensemble.T_max:
        raise ValueError(f"T must lie in [0, {ensemble.T_max}], got {T}")
    if T == 0:
        return np.zeros(ensemble.p)
    counts = ensemble.membership(T).sum(axis=0)
    return counts / ensemble.K


def correlation_matrix(X: np.ndarray) -> np.ndarray:
    """Sample Pearson correlation of the columns of ``X``, unit diagonal."""
    Xc = X - X.mean(axis=0)
    G = Xc.T @ Xc
    d = np.sqrt(np.diag(G))
    corr = G / np.outer(d, d)
    # collinear columns land a few ulps off +-1; snap them so rho_thr = 1 groups them
    snap = np.abs(corr) >= 1.0 - 16 * np.finfo(float).eps
    corr[snap] = np.sign(corr[snap])
    np.clip(corr, -1.0, 1.0, out=corr)
    np.fill_diagonal(corr, 1.0)
    return corr


def _check_corr(corr: np.ndarray) -> np.ndarray:
    corr = np.asarray(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise ValueError("correlation matrix must be square")
    if not np.all(np.isfinite(corr)):
        bad = np.argwhere(~np.isfinite(corr))[0]
        raise ValueError(f"non-finite correlation at {tuple(int(b) for b in bad)}")
    return corr


def nn_groups(corr: np.ndarray, rho_thr: float) -> GroupMap:
    corr = _check_corr(corr)
    if not 0.0 <= rho_thr <= 1.0:
        raise ValueError(f"rho_thr must lie in [0, 1], got {rho_thr}")
    p = corr.shape[0]
    mask = np.abs(corr) >= rho_thr
    np.fill_diagonal(mask, False)
    groups = tuple(frozenset(int(i) for i in np.flatnonzero(mask[j])) for j in range(p))
    return GroupMap(rho_thr=float(rho_thr), groups=groups)


def nn_penalties(phi: np.ndarray, groups: GroupMap) -> np.ndarray:
    """Penalty factor ``1 / (2 - min_{j' in Gr(j)} |phi_j - phi_j'|)``; ``1/2`` for empty groups."""
    phi = np.asarray(phi, dtype=float)
    psi = np.full(phi.shape[0], 0.5)
    for j, gr in enumerate(groups.groups):
        if gr:
            d = np.min(np.abs(phi[j] - phi[list(gr)]))
            psi[j] = 1.0 / (2.0 - d)
    return psi


def nn_occurrences(phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if phi.shape != psi.shape:
        raise ValueError("phi and psi must have equal length")
    return psi * phi


def occurrence_profile(phi: np.ndarray, groups: GroupMap, T: int, L: int) -> OccurrenceProfile:
    psi = nn_penalties(phi, groups)
    return OccurrenceProfile(
        T=T, L=L, rho_thr=groups.rho_thr, phi=np.asarray(phi, float), psi=psi, phi_nn=nn_occurrences(phi, psi)
    )


def rho_grid(step: float = 0.01) -> np.ndarray:
    """Thresholds ``0, step, ..., 1``; ``step`` must divide 1."""
    m = round(1.0 / step)
    if m < 1 or abs(m * step - 1.0) > 1e-9:
        raise ValueError(f"rho step {step} does not divide 1")
    return np.arange(m + 1) / m


class NeighbourIndex:
    """Precomputed neighbour ordering that evaluates penalties on a whole rho grid.

    For each variable the other variables are sorted by decreasing ``|corr|``,
    so ``Gr(j, rho)`` is always a prefix of that order and the group minimum is
    a prefix minimum. Results match :func:`nn_penalties` exactly.
    """

    def __init__(self, corr: np.ndarray, rhos: Sequence[float]):
        corr = _check_corr(corr)
        p = corr.shape[0]
        self.p = p
        self.rhos = np.asarray(rhos, dtype=float)
        a = np.abs(corr)
        np.fill_diagonal(a, -np.inf)
        order = np.argsort(-a, axis=1, kind="stable")[:, : p - 1]
        self.order = order
        sorted_abs = np.take_along_axis(a, order, axis=1)
        # group size of j at each rho: number of |corr| >= rho
        asc = sorted_abs[:, ::-1]
        self.sizes = np.empty((self.rhos.size, p), dtype=int)
        for j in range(p):
            self.sizes[:, j] = (p - 1) - np.searchsorted(asc[j], self.rhos, side="left")

    def penalties(self, phi: np.ndarray) -> np.ndarray:
        """``(n_rho, p)`` array of penalty factors for occurrence vector ``phi``."""
        phi = np.asarray(phi, dtype=float)
        p = self.p
        psi = np.full((self.rhos.size, p), 0.5)
        if p < 2:
            return psi
        d = np.abs(phi[:, None] - phi[self.order])
        pref = np.minimum.accumulate(d, axis=1)
        rows = np.arange(p)
        has = self.sizes > 0
        idx = np.where(has, self.sizes - 1, 0)
        mins = pref[rows[None, :], idx]
        psi[has] = 1.0 / (2.0 - mins[has])
        return psi
