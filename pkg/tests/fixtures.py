"""Synthetic price panels shared by the tracking, CLI and acceptance tests."""
from __future__ import annotations

import datetime as dt

import numpy as np

from trexnn.tracking import PricePanel

TRUE_ASSETS = (3, 17, 29, 41, 55)


def business_days(start: dt.date, count: int) -> tuple:
    out = []
    d = start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d)
        d += dt.timedelta(days=1)
    return tuple(out)


def sparse_index_panel(seed=0, p=60, days=420, noise_sd=0.002, true_assets=None, weights=None):
    """Independent asset returns; the index is an equal-weight combination of ``true_assets`` plus noise.

    Returns the panel, the true asset indices and the daily index noise.
    """
    if true_assets is None:
        true_assets = TRUE_ASSETS if p == 60 else tuple(range(0, p, max(1, p // 5)))[:5]
    rng = np.random.default_rng(seed)
    R = rng.normal(0.0003, 0.01, size=(days, p))
    R[0] = 0.0
    w = np.full(len(true_assets), 1.0 / len(true_assets)) if weights is None else np.asarray(weights)
    eps = rng.normal(0.0, noise_sd, size=days)
    eps[0] = 0.0
    y = R[:, list(true_assets)] @ w + eps
    prices = 100.0 * np.cumprod(1.0 + R, axis=0)
    index = 1000.0 * np.cumprod(1.0 + y)
    dates = business_days(dt.date(2004, 1, 2), days)
    panel = PricePanel(dates, index, prices, tuple(f"S{j:03d}" for j in range(p)))
    return panel, set(true_assets), eps


def market_panel(seed=0, p=40, days=5040):
    """One-factor market of ``p`` stocks over ``days`` trading days; the index is a cap-weighted basket."""
    rng = np.random.default_rng(seed)
    mkt = rng.normal(0.0003, 0.009, size=days)
    beta = rng.uniform(0.6, 1.4, size=p)
    R = mkt[:, None] * beta + rng.normal(0.0, 0.012, size=(days, p))
    R[0] = 0.0
    prices = 50.0 * np.cumprod(1.0 + R, axis=0)
    caps = rng.lognormal(0.0, 1.0, size=p)
    w = caps / caps.sum()
    index = 1500.0 * np.cumprod(1.0 + R @ w + rng.normal(0.0, 0.0005, size=days) * (np.arange(days) > 0))
    dates = business_days(dt.date(2000, 1, 3), days)
    return PricePanel(dates, index, prices, tuple(f"T{j:03d}" for j in range(p)))
