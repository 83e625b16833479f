"""Damped-cosine fits, single-shot sensitivity and scaling exponents."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import least_squares
from scipy.signal import hilbert

ENVELOPES = ("exp", "gauss")
MODEL_SWITCH = 2.0


class FitError(RuntimeError):
    pass


@dataclass
class FitResult:
    m1: float
    m2: float
    amplitude: float
    offset: float
    covariance: np.ndarray
    residual_norm: float
    envelope: str = "exp"
    converged: bool = True
    alternatives: dict = field(default_factory=dict)

    @property
    def gaussian_exponent(self) -> float:
        """m2^2 for the Gaussian envelope exp(-(m2 t)^2)."""
        return self.m2**2 if self.envelope == "gauss" else float("nan")

    def to_dict(self) -> dict:
        return {"m1": self.m1, "m2": self.m2, "amplitude": self.amplitude,
                "offset": self.offset, "residual_norm": self.residual_norm,
                "envelope": self.envelope, "converged": self.converged,
                "stderr": [float(np.sqrt(max(v, 0))) for v in np.diag(self.covariance)],
                "alternatives": self.alternatives}


def damped_cosine(t, m1, m2, amplitude=1.0, offset=0.0, envelope="exp"):
    t = np.asarray(t, dtype=float)
    env = np.exp(-m2 * t) if envelope == "exp" else np.exp(-(m2 * t) ** 2)
    return 0.5 * (1 + amplitude * np.cos(m1 * t) * env) + offset


def _initial_frequency(t, p):
    """Angular frequency of the dominant Fourier peak (uniform resampling,
    zero padding)."""
    n = max(len(t), 64)
    tu = np.linspace(t[0], t[-1], n)
    y = np.interp(tu, t, p)
    y = y - y.mean()
    if np.max(np.abs(y)) < 1e-12:
        raise FitError("no spectral peak: data are flat")
    pad = 16 * n
    spec = np.abs(np.fft.rfft(y * np.hanning(n), pad))
    freqs = np.fft.rfftfreq(pad, tu[1] - tu[0])
    k = np.argmax(spec[1:]) + 1
    return 2 * np.pi * freqs[k]


def _initial_decay(t, p, envelope):
    env = np.abs(hilbert(2 * (p - np.mean(p))))
    keep = (env > 1e-6) & (t > t[0] + 0.1 * (t[-1] - t[0])) & (t < t[-1] - 0.1 * (t[-1] - t[0]))
    if keep.sum() < 3:
        return 0.0
    x = t[keep] if envelope == "exp" else t[keep] ** 2
    slope = np.polyfit(x, np.log(env[keep]), 1)[0]
    if envelope == "exp":
        return max(-slope, 0.0)
    return np.sqrt(max(-slope, 0.0))


def _fit_one(t, p, w, envelope, m1_0, max_nfev):
    m2_0 = _initial_decay(t, p, envelope)

    def resid(x):
        return (damped_cosine(t, *x, envelope=envelope) - p) * w

    x0 = [m1_0, m2_0, 1.0, 0.0]
    lo = [0.0, 0.0, -np.inf, -np.inf]
    sol = least_squares(resid, x0, bounds=(lo, np.inf), xtol=1e-14, ftol=1e-14, gtol=1e-10,
                        max_nfev=max_nfev, x_scale="jac")
    x, fun, j = sol.x, sol.fun, sol.jac
    if x[1] * (t[-1] - t[0]) < 1e-3:
        # trust-region steps only creep towards the m2 = 0 bound; try it exactly
        def resid0(y):
            return resid([y[0], 0.0, y[1], y[2]])
        pinned = least_squares(resid0, [x[0], x[2], x[3]], xtol=1e-15, ftol=1e-15, gtol=1e-12,
                               max_nfev=max_nfev)
        if pinned.cost <= sol.cost:
            x = np.array([pinned.x[0], 0.0, pinned.x[1], pinned.x[2]])
            fun = pinned.fun
            j = np.insert(pinned.jac, 1, sol.jac[:, 1], axis=1)
    dof = max(len(t) - 4, 1)
    s2 = float(fun @ fun) / dof
    try:
        cov = np.linalg.pinv(j.T @ j) * s2
    except np.linalg.LinAlgError:
        cov = np.full((4, 4), np.nan)
    m1, m2, amp, off = x
    return FitResult(float(m1), float(m2), float(amp), float(off), cov,
                     float(np.linalg.norm(fun)), envelope, bool(sol.status > 0))


def fit_damped_cosine(t, p, sigma=None, envelope: str = "auto", max_nfev: int = 2000) -> FitResult:
    """Weighted least squares for p = (1 + A cos(m1 t) env(m2 t))/2 + c.

    ``envelope`` is ``exp`` (e^{-m2 t}), ``gauss`` (e^{-(m2 t)^2}) or
    ``auto``: both are fitted and the Gaussian one is chosen when the
    exponential residual is more than twice as large.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    if t.shape != p.shape or t.size < 8:
        raise ValueError("need at least 8 samples of matching shape")
    if sigma is None:
        w = np.ones_like(t)
    else:
        sigma = np.asarray(sigma, dtype=float)
        if np.any(sigma <= 0):
            raise ValueError("sigma must be positive")
        w = 1 / sigma
    m1_0 = _initial_frequency(t, p)
    if m1_0 * (t[-1] - t[0]) < 1.5 * 2 * np.pi:
        raise ValueError("data span fewer than 1.5 oscillation periods")
    kinds = ENVELOPES if envelope == "auto" else (envelope,)
    fits = {k: _fit_one(t, p, w, k, m1_0, max_nfev) for k in kinds}
    if not any(f.converged for f in fits.values()):
        raise FitError("least squares did not converge")
    if envelope != "auto":
        return fits[envelope]
    e, g = fits["exp"], fits["gauss"]
    chosen = g if e.residual_norm > MODEL_SWITCH * g.residual_norm else e
    chosen.alternatives = {k: {"m1": f.m1, "m2": f.m2, "residual_norm": f.residual_norm}
                           for k, f in fits.items()}
    return chosen


# --- sensitivity ----------------------------------------------------------

@dataclass
class SensitivityReport:
    delta_g: float
    optimal_t: float
    scaling_exponent: float | None = None
    baseline_ramsey: float | None = None
    richardson_ratio: float | None = None
    curve: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {"delta_g": self.delta_g, "optimal_t": self.optimal_t,
                "scaling_exponent": self.scaling_exponent,
                "baseline_ramsey": self.baseline_ramsey,
                "richardson_ratio": self.richardson_ratio}


def dp_dg(p_of: Callable, t, g: float, rel_step: float = 1e-4):
    h = rel_step * abs(g) if g != 0 else rel_step
    return (p_of(t, g + h) - p_of(t, g - h)) / (2 * h)


def richardson_ratio(p_of: Callable, t, g: float, rel_step: float = 1e-4) -> float:
    """(D(4h) - D(2h)) / (D(2h) - D(h)) for the central difference; close to
    4 in the truncation-dominated regime."""
    d1 = dp_dg(p_of, t, g, 4 * rel_step)
    d2 = dp_dg(p_of, t, g, 2 * rel_step)
    d3 = dp_dg(p_of, t, g, rel_step)
    return float(np.squeeze((d1 - d2) / (d2 - d3)))


def sensitivity(p_of: Callable, g: float, t_total: float, t_grid,
                rel_step: float = 1e-4) -> SensitivityReport:
    """min over t in ``t_grid`` of sqrt(p(1-p)) / (|dp/dg| sqrt(T/t)).

    ``p_of(t, g)`` must accept an array of times.  Repetitions of a single
    readout at time t fill the total time T.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    t_grid = t_grid[(t_grid > 0) & (t_grid <= t_total * (1 + 1e-12))]
    if t_grid.size == 0:
        raise ValueError("t_grid has no points in (0, T]")
    p = np.clip(p_of(t_grid, g), 0.0, 1.0)
    d = np.abs(dp_dg(p_of, t_grid, g, rel_step))
    ok = d > 1e-14
    if not ok.any():
        raise ValueError("dp/dg vanishes on the whole grid")
    curve = np.full(t_grid.shape, np.inf)
    curve[ok] = np.sqrt(p[ok] * (1 - p[ok])) / (d[ok] * np.sqrt(t_total / t_grid[ok]))
    k = int(np.argmin(curve))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = richardson_ratio(p_of, t_grid[k:k + 1], g, rel_step)
    return SensitivityReport(float(curve[k]), float(t_grid[k]),
                             richardson_ratio=ratio, curve=np.vstack([t_grid, curve]))


def scaling_exponent(points) -> float:
    """Least-squares slope of log(delta_g) against log(T)."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[0] < 4:
        raise ValueError("need at least 4 (T, delta_g) points")
    if np.any(arr <= 0):
        raise ValueError("T and delta_g must be positive")
    x, y = np.log10(arr[:, 0]), np.log10(arr[:, 1])
    if x.max() - x.min() < 1.5 - 1e-9:
        raise ValueError("T values must span at least 1.5 decades")
    return float(np.polyfit(x, y, 1)[0])


def ramsey_curve(gamma: float, phase: float = np.pi / 2) -> Callable:
    """Single decaying probe: (1 + cos(2 g t - phase) e^{-gamma t}) / 2."""
    def p_of(t, g):
        t = np.asarray(t, dtype=float)
        return 0.5 * (1 + np.cos(2 * g * t - phase) * np.exp(-gamma * t))
    return p_of


def protected_curve(gamma: float, alpha: float = 0.0, kappa: float = 0.0,
                    phase: float = np.pi / 2) -> Callable:
    """Corrected protocol in the reduced two-level description, decay
    2(gamma alpha + kappa/2), read out with relative phase ``phase``."""
    rate = 2 * (gamma * alpha + kappa / 2)

    def p_of(t, g):
        t = np.asarray(t, dtype=float)
        return 0.5 * (1 + np.cos(2 * g * t - phase) * np.exp(-rate * t))
    return p_of


def predicted_lossy_sensitivity(gamma: float, alpha: float, t_total: float) -> float:
    """sqrt(2 gamma e / T) sqrt(alpha / 2)."""
    return float(np.sqrt(2 * gamma * np.e / t_total) * np.sqrt(alpha / 2))


def scaling_study(p_of: Callable, g: float, totals, n_grid: int = 4000,
                  t_min: float | None = None) -> tuple[list, float]:
    """Optimal delta_g for each total time (grid of readout times up to T)."""
    pts = []
    for big_t in totals:
        lo = t_min if t_min is not None else big_t / n_grid
        grid = np.linspace(lo, big_t, n_grid)
        pts.append((float(big_t), sensitivity(p_of, g, big_t, grid).delta_g))
    return pts, scaling_exponent(pts)
