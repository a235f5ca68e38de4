"""ARIMA(p, d, q) by conditional sum of squares, with grid order selection.

The differenced series ``w`` follows

    w[t] = c + sum_i phi[i] * w[t-i] + sum_j theta[j] * e[t-j] + e[t]

Residuals are computed from ``t = p`` with pre-sample residuals fixed at 0.
Pure AR fits are ordinary least squares; anything with an MA part is
refined by Levenberg-Marquardt starting from the AR-only fit with theta = 0.
"""
from __future__ import annotations

import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import lfilter

MAX_ITER = 500
REL_TOL = 1e-10


class ArimaError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class ArimaOrder:
    p: int
    d: int
    q: int

    def __post_init__(self):
        if min(self.p, self.d, self.q) < 0:
            raise ArimaError(f"order components must be >= 0, got {self}")

    @property
    def n_params(self) -> int:
        # intercept + AR + MA
        return 1 + self.p + self.q


@dataclass(frozen=True)
class ArimaModel:
    order: ArimaOrder
    ar_coeffs: np.ndarray
    ma_coeffs: np.ndarray
    intercept: float
    sigma2: float
    n_obs: int
    sse: float
    aic: float
    bic: float
    converged: bool = True
    n_iter: int = field(default=0, compare=False)

    def to_dict(self) -> dict:
        return {
            "kind": "arima",
            "order": [self.order.p, self.order.d, self.order.q],
            "ar": self.ar_coeffs.tolist(),
            "ma": self.ma_coeffs.tolist(),
            "intercept": self.intercept,
            "sigma2": self.sigma2,
            "aic": self.aic,
            "bic": self.bic,
            "converged": self.converged,
            "n_obs": self.n_obs,
            "sse": self.sse,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "ArimaModel":
        order = ArimaOrder(*data["order"])
        return cls(
            order=order,
            ar_coeffs=np.asarray(data["ar"], dtype=np.float64),
            ma_coeffs=np.asarray(data["ma"], dtype=np.float64),
            intercept=float(data["intercept"]),
            sigma2=float(data["sigma2"]),
            n_obs=int(data.get("n_obs", 0)),
            sse=float(data.get("sse", math.nan)),
            aic=float(data["aic"]),
            bic=float(data["bic"]),
            converged=bool(data["converged"]),
        )


def difference(series, d: int) -> np.ndarray:
    y = np.asarray(series, dtype=np.float64)
    if d < 0:
        raise ArimaError(f"d must be >= 0, got {d}")
    if d >= len(y):
        raise ArimaError(f"cannot difference {len(y)} values {d} times")
    return np.diff(y, n=d) if d else y.copy()


def information_criteria(sse: float, n_obs: int, k: int) -> tuple[float, float]:
    """Gaussian CSS forms: ``n ln(sse/n) + 2k`` and ``n ln(sse/n) + k ln n``."""
    if not sse > 0:
        raise ArimaError(f"sse must be > 0, got {sse}")
    if n_obs <= k:
        raise ArimaError(f"n_obs ({n_obs}) must exceed parameter count ({k})")
    fit = n_obs * math.log(sse / n_obs)
    return fit + 2 * k, fit + k * math.log(n_obs)


def _lag_matrix(w: np.ndarray, p: int) -> np.ndarray:
    """Columns w[t-1], ..., w[t-p] for t = p .. n-1."""
    n = len(w)
    return np.column_stack([w[p - i:n - i] for i in range(1, p + 1)]) if p else np.empty((n, 0))


def css_residuals(w: np.ndarray, p: int, c: float, phi, theta) -> np.ndarray:
    """One-step residuals e[p:], pre-sample residuals zero."""
    w = np.asarray(w, dtype=np.float64)
    u = w[p:] - c
    if p:
        u = u - _lag_matrix(w, p) @ np.asarray(phi, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if len(theta):
        return lfilter([1.0], np.r_[1.0, theta], u)
    return u


def _shift(e: np.ndarray, j: int) -> np.ndarray:
    out = np.zeros_like(e)
    out[j:] = e[:-j]
    return out


def _jacobian(p, q, lags, theta, e) -> np.ndarray:
    """d e / d (c, phi, theta): each column is a regressor passed through 1/theta(B)."""
    regressors = np.column_stack(
        [np.ones(len(e)), lags] + [_shift(e, j) for j in range(1, q + 1)]
    )
    return lfilter([1.0], np.r_[1.0, theta], -regressors, axis=0)


def is_invertible(theta) -> bool:
    """True when 1 + theta_1 z + ... + theta_q z^q has all roots outside the unit circle."""
    theta = np.asarray(theta, dtype=np.float64)
    if not len(theta) or not np.any(theta):
        return True
    # roots of z^q + theta_1 z^(q-1) + ... + theta_q are the reciprocals
    return bool(np.all(np.abs(np.roots(np.r_[1.0, theta])) < 1.0))


def _sse(e: np.ndarray) -> float:
    with np.errstate(over="ignore", invalid="ignore"):
        s = float(e @ e)
    return s if math.isfinite(s) else math.inf


def fit_arima(series, order: ArimaOrder) -> ArimaModel:
    """Conditional-least-squares ARIMA fit on the raw (undifferenced) series."""
    p, d, q = order.p, order.d, order.q
    w = difference(series, d)
    n = len(w)
    if n < 10 * (p + q + 1):
        raise ArimaError(f"{n} observations after differencing is too few for {order}")
    if np.ptp(w) == 0:
        raise ArimaError("series is constant after differencing")

    lags = _lag_matrix(w, p)
    target = w[p:]
    X = np.column_stack([np.ones(len(target)), lags])
    beta, *_ = np.linalg.lstsq(X, target, rcond=None)
    params = np.r_[beta, np.zeros(q)]
    converged, n_iter = True, 0

    def unpack(v):
        return v[0], v[1:1 + p], v[1 + p:]

    e = css_residuals(w, p, *unpack(params))
    sse = _sse(e)

    if q:
        converged = False
        lam = 1e-3
        for n_iter in range(1, MAX_ITER + 1):
            J = _jacobian(p, q, lags, unpack(params)[2], e)
            JtJ = J.T @ J
            g = J.T @ e
            improved = False
            while lam < 1e16:
                A = JtJ + lam * np.diag(np.maximum(np.diag(JtJ), 1e-12))
                try:
                    step = np.linalg.solve(A, -g)
                except np.linalg.LinAlgError:
                    lam *= 10
                    continue
                trial = params + step
                if not is_invertible(unpack(trial)[2]):
                    lam *= 10
                    continue
                e_trial = css_residuals(w, p, *unpack(trial))
                sse_trial = _sse(e_trial)
                if sse_trial < sse:
                    rel = (sse - sse_trial) / sse
                    params, e, sse = trial, e_trial, sse_trial
                    lam = max(lam / 10, 1e-12)
                    improved = True
                    break
                lam *= 10
            if not improved or rel < REL_TOL:
                # no descent direction left at any damping: stationary point
                converged = True
                break

    c, phi, theta = unpack(params)
    n_obs = len(e)
    aic, bic = information_criteria(sse, n_obs, order.n_params)
    return ArimaModel(
        order=order,
        ar_coeffs=np.array(phi),
        ma_coeffs=np.array(theta),
        intercept=float(c),
        sigma2=sse / n_obs,
        n_obs=n_obs,
        sse=sse,
        aic=aic,
        bic=bic,
        converged=converged,
        n_iter=n_iter,
    )


def _try_fit(args):
    series, order = args
    try:
        return fit_arima(series, order)
    except ArimaError:
        return None


def candidate_orders(max_p: int, max_d: int, max_q: int) -> list[ArimaOrder]:
    return [ArimaOrder(p, d, q) for p, d, q in itertools.product(
        range(max_p + 1), range(max_d + 1), range(max_q + 1))]


def selection_key(model: ArimaModel, criterion: str):
    o = model.order
    return (getattr(model, criterion), o.p + o.q, o.d, o.p)


def auto_arima(series, max_p: int = 5, max_d: int = 2, max_q: int = 5,
               criterion: str = "bic", n_jobs: int = 1) -> ArimaModel:
    """Exhaustive grid search; returns the converged fit minimising ``criterion``.

    Orders that fail the sample-size guard or hit a degenerate series are
    skipped. Ties go to smaller p+q, then smaller d, then smaller p.
    """
    if criterion not in ("aic", "bic"):
        raise ArimaError(f"criterion must be 'aic' or 'bic', got {criterion!r}")
    if min(max_p, max_d, max_q) < 0:
        raise ArimaError("grid maxima must be >= 0")
    y = np.asarray(series, dtype=np.float64)
    jobs = [(y, o) for o in candidate_orders(max_p, max_d, max_q)]
    if n_jobs > 1:
        with ProcessPoolExecutor(n_jobs) as pool:
            fits = list(pool.map(_try_fit, jobs, chunksize=4))
    else:
        fits = [_try_fit(j) for j in jobs]
    fits = [m for m in fits if m is not None and m.converged]
    if not fits:
        raise ArimaError("no candidate order produced a converged fit")
    return min(fits, key=lambda m: selection_key(m, criterion))


def arima_forecast(model: ArimaModel, recent, h: int, residuals=None) -> np.ndarray:
    """Forecast ``h`` steps past the end of ``recent`` (raw, undifferenced values).

    Residuals for the MA terms are recomputed over ``recent`` with the CSS
    recursion unless supplied (aligned with the end of the differenced history).
    Future shocks are zero; results are integrated back ``d`` times.
    """
    p, d, q = model.order.p, model.order.d, model.order.q
    if h < 1:
        raise ArimaError(f"horizon must be >= 1, got {h}")
    y = np.asarray(recent, dtype=np.float64)
    need = max(1, p + d + (q if residuals is None else 0))
    if len(y) < need:
        raise ArimaError(f"{model.order} needs at least {need} recent values, got {len(y)}")

    levels = [y]
    for _ in range(d):
        levels.append(np.diff(levels[-1]))
    w = levels[-1]
    if q:
        if residuals is None:
            residuals = css_residuals(w, p, model.intercept, model.ar_coeffs, model.ma_coeffs)
        residuals = np.asarray(residuals, dtype=np.float64)
        if len(residuals) < q:
            residuals = np.r_[np.zeros(q - len(residuals)), residuals]

    hist = list(w[len(w) - p:]) if p else []
    errs = list(residuals[-q:]) if q else []
    out = np.empty(h)
    for k in range(h):
        val = model.intercept
        for i in range(p):
            val += model.ar_coeffs[i] * hist[-1 - i]
        for j in range(q):
            val += model.ma_coeffs[j] * errs[-1 - j]
        out[k] = val
        if p:
            hist.append(val)
        if q:
            errs.append(0.0)

    for level in reversed(levels[:-1]):
        out = level[-1] + np.cumsum(out)
    return out


def model_summary(model: ArimaModel) -> dict:
    d = asdict(model.order)
    d.update(aic=model.aic, bic=model.bic, sse=model.sse, converged=model.converged)
    return d
