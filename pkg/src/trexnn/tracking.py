"""Index tracking: returns, the simplex-constrained ridge QP and the rolling backtest."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from .calibration import calibrate
from .dataset import DataError, validate_and_standardize
from .forward import DummyConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PricePanel:
    dates: tuple
    index_prices: np.ndarray
    asset_prices: np.ndarray  # days x assets
    asset_ids: tuple

    def __post_init__(self):
        ind = np.asarray(self.index_prices, dtype=float)
        px = np.asarray(self.asset_prices, dtype=float)
        if px.ndim != 2 or px.shape[0] != ind.shape[0] or len(self.dates) != ind.shape[0]:
            raise DataError("dates, index prices and asset prices must have the same number of days")
        if px.shape[1] != len(self.asset_ids):
            raise DataError("one asset id per price column required")
        if not (np.all(np.isfinite(ind)) and np.all(np.isfinite(px))):
            raise DataError("prices must be finite")
        if np.any(ind <= 0) or np.any(px <= 0):
            raise DataError("prices must be strictly positive")
        if any(b <= a for a, b in zip(self.dates[:-1], self.dates[1:])):
            raise DataError("dates must be strictly increasing")
        object.__setattr__(self, "index_prices", ind)
        object.__setattr__(self, "asset_prices", px)

    @property
    def n_days(self) -> int:
        return len(self.dates)

    @property
    def p(self) -> int:
        return self.asset_prices.shape[1]


@dataclass(frozen=True)
class ReturnsWindow:
    y: np.ndarray
    X: np.ndarray
    window_id: int
    start: int  # first day index whose return is included
    stop: int  # one past the last day index

    @property
    def n(self) -> int:
        return self.y.shape[0]


def simple_returns(prices: np.ndarray) -> np.ndarray:
    prices = np.asarray(prices, dtype=float)
    return (prices[1:] - prices[:-1]) / prices[:-1]


def to_returns(panel: PricePanel, start: int, stop: int, window_id: int = 0) -> ReturnsWindow:
    """Daily returns for days ``start..stop-1``, using day ``start-1`` as reference."""
    if start < 1:
        raise DataError(f"window starting at day {start} has no reference day")
    if stop > panel.n_days or stop - start < 1 or stop - start + 1 < 2:
        raise DataError(f"invalid window [{start}, {stop}) for a panel of {panel.n_days} days")
    y = simple_returns(panel.index_prices[start - 1 : stop])
    X = simple_returns(panel.asset_prices[start - 1 : stop])
    return ReturnsWindow(y=y, X=X, window_id=window_id, start=start, stop=stop)


# --- simplex QP -------------------------------------------------------------


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum w = 1}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


@dataclass
class QPResult:
    w: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    status: str


def tracking_objective(w, X, y, lam) -> float:
    r = y - X @ w
    return float(r @ r + lam * (w @ w))


def kkt_residual(w, Q, b) -> float:
    """Projected-gradient fixed-point residual ``||w - P(w - grad)||_inf``."""
    grad = 2.0 * (Q @ w - b)
    return float(np.max(np.abs(w - project_simplex(w - grad))))


def _polish(w, Q, b):
    """Solve the equality-constrained QP on the support of ``w``; None if that is not optimal."""
    S = np.flatnonzero(w > 1e-10)
    s = S.size
    A = np.zeros((s + 1, s + 1))
    A[:s, :s] = 2.0 * Q[np.ix_(S, S)]
    A[:s, s] = 1.0
    A[s, :s] = 1.0
    rhs = np.concatenate([2.0 * b[S], [1.0]])
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        return None
    if np.any(sol[:s] < 0):
        return None
    out = np.zeros_like(w)
    out[S] = sol[:s]
    out /= out.sum()
    return out


def solve_tracking_qp(
    X_sel: np.ndarray,
    y: np.ndarray,
    lam: Optional[float] = None,
    *,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> QPResult:
    """Minimize ``||y - X w||^2 + lam ||w||^2`` over the probability simplex.

    Accelerated projected gradient followed by an active-set polish on the
    detected support. ``lam=None`` uses ``1e-6 * trace(X'X) / s``.

    Raises
    ------
    ValueError
        If ``X_sel`` has no columns; callers fall back to another portfolio.
    """
    X = np.asarray(X_sel, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError("no selected assets: the tracking QP needs at least one column")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite returns passed to the tracking QP")
    s = X.shape[1]
    if lam is None:
        lam = default_ridge(X)
    if lam < 0:
        raise ValueError("ridge parameter must be nonnegative")
    if s == 1:
        w = np.ones(1)
        return QPResult(w, tracking_objective(w, X, y, lam), 0.0, 0, True, "trivial")

    Q = X.T @ X + lam * np.eye(s)
    b = X.T @ y
    lip = 2.0 * float(np.linalg.eigvalsh(Q)[-1])
    if lip <= 0:
        w = np.full(s, 1.0 / s)
        return QPResult(w, tracking_objective(w, X, y, lam), kkt_residual(w, Q, b), 0, True, "flat")
    step = 1.0 / lip
    w = np.full(s, 1.0 / s)
    z = w.copy()
    t = 1.0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        grad = 2.0 * (Q @ z - b)
        w_next = project_simplex(z - step * grad)
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = w_next + ((t - 1.0) / t_next) * (w_next - w)
        # restart momentum when the objective would increase
        if (w_next - w) @ (z - w_next) > 0 and tracking_objective(w_next, X, y, lam) > tracking_objective(w, X, y, lam):
            z = w_next.copy()
            t_next = 1.0
        done = np.max(np.abs(w_next - w)) <= tol
        w, t = w_next, t_next
        if done:
            converged = True
            break

    polished = _polish(w, Q, b)
    if polished is not None:
        if kkt_residual(polished, Q, b) <= kkt_residual(w, Q, b) and tracking_objective(
            polished, X, y, lam
        ) <= tracking_objective(w, X, y, lam) + 1e-15:
            w = polished
    res = kkt_residual(w, Q, b)
    converged = converged or res <= 1e-9
    return QPResult(
        w=w,
        objective=tracking_objective(w, X, y, lam),
        kkt_residual=res,
        iterations=it,
        converged=converged,
        status="converged" if converged else "max_iter",
    )


def default_ridge(X: np.ndarray) -> float:
    X = np.asarray(X, dtype=float)
    return 1e-6 * float(np.sum(X * X)) / X.shape[1]


# --- rolling backtest -------------------------------------------------------


@dataclass
class PeriodResult:
    m: int
    train_start: int
    train_stop: int
    test_start: int
    test_stop: int
    train_dates: tuple
    test_dates: tuple
    weights: np.ndarray  # length p
    selected: tuple  # asset indices
    selected_ids: tuple
    fallback: Optional[str]  # None, "carry_forward" or "equal_weights"
    ridge: Optional[float]
    v_star: Optional[float] = None
    rho_star: Optional[float] = None
    T_star: Optional[int] = None
    L_star: Optional[int] = None
    qp_status: Optional[str] = None


@dataclass
class PortfolioSchedule:
    periods: List[PeriodResult]
    asset_ids: tuple
    alpha: float
    window_n: int
    lam: Optional[float]

    @property
    def M(self) -> int:
        return len(self.periods)

    def weights(self) -> np.ndarray:
        return np.vstack([pr.weights for pr in self.periods])


def period_bounds(n_days: int, window_n: int) -> List[tuple]:
    """Consecutive periods of ``window_n`` days, as ``[start, stop)`` day indices."""
    P = n_days // window_n
    return [(k * window_n, (k + 1) * window_n) for k in range(P)]


def rolling_backtest(
    panel: PricePanel,
    alpha: float,
    window_n: int = 60,
    cfg: DummyConfig = DummyConfig(),
    lam: Optional[float] = None,
    *,
    rho_step: float = 0.01,
    penalize: bool = True,
) -> PortfolioSchedule:
    """Rolling FDR-controlled index tracking.

    Days are cut into consecutive periods of ``window_n`` days; period ``m``
    trains the portfolio that is held over period ``m + 1``. The first
    period has no earlier reference day, so its returns start at its second
    day. Per period: standardize, calibrate, solve the QP on the raw returns
    of the selected assets. An empty selection reuses the previous weights,
    or equal weights over all assets in the first period.
    """
    if window_n < 2:
        raise ValueError("window_n must be >= 2")
    bounds = period_bounds(panel.n_days, window_n)
    if len(bounds) < 2:
        raise DataError(
            f"panel of {panel.n_days} days is shorter than two windows of {window_n} days"
        )
    p = panel.p
    periods: List[PeriodResult] = []
    prev_w = None
    for m, ((a, b), (c, d)) in enumerate(zip(bounds[:-1], bounds[1:]), start=1):
        win = to_returns(panel, max(a, 1), b, window_id=m)
        ds = validate_and_standardize(win.X, win.y, column_ids=panel.asset_ids)
        # per-window seeds keep windows independent and reproducible
        wcfg = DummyConfig(K=cfg.K, L=cfg.L, seed=int(np.random.SeedSequence([cfg.seed, m]).generate_state(1)[0]))
        out = calibrate(ds, alpha, wcfg, rho_step=rho_step, penalize=penalize)
        sel = out.selected.selected
        fallback = None
        ridge = None
        qp_status = None
        if sel:
            X_sel = win.X[:, list(sel)]
            ridge = default_ridge(X_sel) if lam is None else lam
            qp = solve_tracking_qp(X_sel, win.y, ridge)
            if not qp.converged:
                logger.warning("window %d: QP stopped at iteration cap (residual %.2e)", m, qp.kkt_residual)
            w = np.zeros(p)
            w[list(sel)] = qp.w
            qp_status = qp.status
        elif prev_w is not None:
            w = prev_w.copy()
            fallback = "carry_forward"
        else:
            w = np.full(p, 1.0 / p)
            fallback = "equal_weights"
        if fallback:
            logger.info("window %d: empty selection, fallback=%s", m, fallback)
        periods.append(
            PeriodResult(
                m=m, train_start=win.start, train_stop=b, test_start=c, test_stop=d,
                train_dates=(panel.dates[win.start], panel.dates[b - 1]),
                test_dates=(panel.dates[c], panel.dates[d - 1]),
                weights=w, selected=tuple(sel), selected_ids=tuple(panel.asset_ids[j] for j in sel),
                fallback=fallback, ridge=ridge, v_star=out.v_star, rho_star=out.rho_star,
                T_star=out.T_star, L_star=out.L_star, qp_status=qp_status,
            )
        )
        prev_w = w
    return PortfolioSchedule(periods=periods, asset_ids=tuple(panel.asset_ids), alpha=alpha, window_n=window_n, lam=lam)


@dataclass
class TrackingMetrics:
    """Per-period wealth paths (both start at 1) and mean squared wealth tracking error."""

    dates: List[tuple]
    portfolio_wealth: List[np.ndarray]
    index_wealth: List[np.ndarray]
    mste: np.ndarray
    num_stocks: np.ndarray

    @property
    def overall_mste(self) -> float:
        return float(np.mean(self.mste)) if self.mste.size else float("nan")


def wealth_paths(port_returns: np.ndarray, index_returns: np.ndarray):
    return np.cumprod(1.0 + port_returns), np.cumprod(1.0 + index_returns)


def window_mste(port_returns: np.ndarray, index_returns: np.ndarray) -> float:
    wp, wi = wealth_paths(port_returns, index_returns)
    return float(np.mean((wp - wi) ** 2))


def wealth_and_mste(schedule: PortfolioSchedule, panel: PricePanel) -> TrackingMetrics:
    """Evaluate each period's weights on its test window.

    Wealth compounds daily with the portfolio return ``w' x_i`` against the
    index return ``y_i``; a window's MSTE averages the squared wealth gap
    over its days.
    """
    dates, pw, iw, mste, k = [], [], [], [], []
    for pr in schedule.periods:
        win = to_returns(panel, pr.test_start, pr.test_stop, window_id=pr.m)
        rp = win.X @ pr.weights
        a, b = wealth_paths(rp, win.y)
        dates.append(tuple(panel.dates[pr.test_start : pr.test_stop]))
        pw.append(a)
        iw.append(b)
        mste.append(float(np.mean((a - b) ** 2)))
        k.append(int(np.count_nonzero(pr.weights > 0)))
    return TrackingMetrics(dates, pw, iw, np.asarray(mste), np.asarray(k))
