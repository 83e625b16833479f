"""Closed-form model of Example I with a fixed delay tau between a click and
its correction.

After a jump at the end of an interval t_i and the delayed correction, the
|O+> and |O-> amplitudes pick up factors proportional to a(t_i) and
b(t_i); the wrong-subspace admixture is O(g tau, gamma tau) and is dropped
by :func:`exact_probability`.  :func:`record_probability` keeps it by
composing the exact 2x2 sector propagators.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

VALIDITY_WARN = 0.5


class ValidityWarning(UserWarning):
    """Parameters outside the regime where an approximation is meant to hold."""


class DegenerateProbability(ArithmeticError):
    """Both code amplitudes vanished; the record has zero probability."""


@dataclass(frozen=True)
class DelayParams:
    tau: float
    g: float
    gamma: float = 1.0

    def __post_init__(self):
        if self.tau < 0 or self.gamma < 0:
            raise ValueError("tau and gamma must be non-negative")
        if abs(self.g) * self.tau > VALIDITY_WARN or self.gamma * self.tau > VALIDITY_WARN:
            warnings.warn(f"g*tau={self.g * self.tau:.3g}, gamma*tau={self.gamma * self.tau:.3g} "
                          "not small", ValidityWarning, stacklevel=2)

    @property
    def time_factor(self) -> float:
        """Fraction of wall time spent outside correction delays, 1 - gamma*tau."""
        return 1.0 - self.gamma * self.tau


def _s(g, x):
    """sin(g x)/g, finite at g = 0."""
    return x * np.sinc(g * np.asarray(x, dtype=float) / np.pi)


def a_coeff(t, p: DelayParams):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    g, gam, tau = p.g, p.gamma, p.tau
    e = np.exp(1j * g * t)
    return (np.conj(e) * np.cos(g * tau) - 1j * np.sin(g * tau) * e
            + gam * _s(g, tau) * e - 0.5 * gam**2 * _s(g, tau) * _s(g, t))


def b_coeff(t, p: DelayParams):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    g, gam, tau = p.g, p.gamma, p.tau
    st, stau = _s(g, t), _s(g, tau)
    return (np.exp(-1j * g * tau) * np.cos(g * t) + 1j * np.cos(g * tau) * np.sin(g * t)
            - np.sin(g * tau) * np.sin(g * t)
            + (2j * gam * g + 0.5 * gam**2) * stau * st)


def a_printed(t, p: DelayParams):
    """Literal 1/(4g^2) form; singular at g = 0."""
    g, gam, tau = p.g, p.gamma, p.tau
    return np.exp(-1j * g * t) / (4 * g * g) * (
        4 * g * g * np.cos(g * tau)
        - 1j * np.sin(g * tau) * (gam**2 + np.exp(2j * g * t) * (2 * g + 1j * gam) ** 2))


def a_printed_short(t, p: DelayParams):
    """Three-term form of a(t)."""
    g, gam, tau = p.g, p.gamma, p.tau
    return (np.exp(-1j * g * t) * np.cos(g * tau)
            - 1j * np.sin(g * tau) * np.exp(1j * g * t) * (2 * g + 1j * gam) ** 2 / (4 * g * g)
            - 1j * gam**2 / (4 * g * g) * np.sin(g * tau) * np.exp(-1j * g * t))


def b_printed(t, p: DelayParams):
    g, gam, tau = p.g, p.gamma, p.tau
    return np.exp(-1j * g * tau) / (2 * g * g) * (
        2 * g * g * np.cos(g * t)
        + np.exp(1j * g * tau) * (2j * g * g * np.cos(g * tau)
                                  + (-2 * g * g + 4j * g * gam + gam**2) * np.sin(g * tau))
        * np.sin(g * t))


def _combine(log_abs_a, log_abs_b, phase):
    """1/2 + 1/2 Re(prod a^* b)/((prod|a|^2 + prod|b|^2)/2) in log form."""
    if not (np.isfinite(log_abs_a) or np.isfinite(log_abs_b)):
        raise DegenerateProbability("both products vanished")
    d = log_abs_a - log_abs_b
    if not np.isfinite(d):
        return 0.5
    return 0.5 + 0.5 * np.cos(phase) / np.cosh(d)


def exact_probability(times, p: DelayParams, tail: float = 0.0) -> float:
    """Product formula over the inter-jump intervals ``times``.

    ``tail`` is an optional free evolution after the last correction (adds
    the relative phase 2 g tail).  Accumulated in log form, so lists of
    any length are safe.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        raise ValueError("need at least one interval")
    if np.any(times <= 0):
        raise ValueError("intervals must be positive")
    a, b = a_coeff(times, p), b_coeff(times, p)
    with np.errstate(divide="ignore"):
        la = np.sum(np.log(np.abs(a)))
        lb = np.sum(np.log(np.abs(b)))
    phase = np.sum(np.angle(b) - np.angle(a)) + 2 * p.g * tail
    return float(_combine(la, lb, phase))


# --- exact Example I sector composition -----------------------------------

_SQ = 1 / np.sqrt(2)
# correction restricted to good-qubit sector s, basis (up, down) of qubit 1
_C_SECTOR = (np.array([[_SQ, _SQ], [-_SQ, _SQ]], dtype=complex),
             np.array([[_SQ, _SQ], [_SQ, -_SQ]], dtype=complex))
_SM = np.array([[0, 0], [1, 0]], dtype=complex)
_START = (np.array([0.5, 0.5], dtype=complex), np.array([0.5, -0.5], dtype=complex))


def sector_propagator(s: int, t: float, p: DelayParams) -> np.ndarray:
    """exp(-i H_nh t) on good-qubit sector s (0 or 1) of Example I.

    The block is -i gamma/2 + K_s with K_s^2 = g^2, so the exponential is
    e^{-gamma t/2}(cos(g t) - i sin(g t) K_s / g).
    """
    g, gam = p.g, p.gamma
    z = 1.0 if s == 0 else -1.0
    k = np.array([[-0.5j * gam, g + 0.5j * gam * z], [g - 0.5j * gam * z, 0.5j * gam]])
    return np.exp(-gam * t / 2) * (np.cos(g * t) * np.eye(2) - 1j * _s(g, t) * k)


def record_probability(jump_times, t_end: float, p: DelayParams) -> float:
    """Readout probability of |psi_0> at ``t_end`` for Example I given the
    absolute times of all (detected) jumps.

    Each jump is followed by the correction after ``tau``.  A correction
    still pending at ``t_end`` is not applied.  Jumps must be separated by
    more than ``tau`` (no jumps during a delay).
    """
    jump_times = np.asarray(jump_times, dtype=float)
    if np.any(np.diff(jump_times) <= p.tau) or (jump_times.size and
                                                 (jump_times[0] < 0 or jump_times[-1] > t_end)):
        raise ValueError("jump times must be sorted, inside [0, t_end] and spaced by more than tau")
    vecs = [v.copy() for v in _START]
    clock = 0.0
    for tj in jump_times:
        for s in (0, 1):
            v = sector_propagator(s, tj - clock, p) @ vecs[s]
            v = _SM @ v
            if tj + p.tau <= t_end:
                v = _C_SECTOR[s] @ (sector_propagator(s, p.tau, p) @ v)
            else:
                v = sector_propagator(s, t_end - tj, p) @ v
            vecs[s] = v
        clock = min(tj + p.tau, t_end)
        nrm = np.sqrt(sum(np.vdot(v, v).real for v in vecs))
        if nrm == 0:
            raise DegenerateProbability("record has zero probability")
        vecs = [v / nrm for v in vecs]
    for s in (0, 1):
        vecs[s] = sector_propagator(s, t_end - clock, p) @ vecs[s]
    nn = sum(np.vdot(v, v).real for v in vecs)
    if nn == 0:
        raise DegenerateProbability("record has zero probability")
    amp = sum(np.vdot(r, v) for r, v in zip(_START, vecs))
    return float(abs(amp) ** 2 / nn)


# --- averaged and approximate curves --------------------------------------

def validity_window(p: DelayParams) -> tuple[float, float]:
    """(1/gamma, 1/(g^2 sqrt(gamma tau^3))); the approximation needs t well inside."""
    lo = 1.0 / p.gamma if p.gamma > 0 else 0.0
    hi = np.inf if p.tau == 0 or p.g == 0 else 1.0 / (p.g**2 * np.sqrt(p.gamma * p.tau**3))
    return lo, hi


def _check_window(t, p: DelayParams):
    lo, hi = validity_window(p)
    t = np.atleast_1d(t)
    if np.any(t < lo) or np.any(t > hi):
        warnings.warn(f"t outside validity window [{lo:.3g}, {hi:.3g}]", ValidityWarning,
                      stacklevel=3)


def approx_probability(t, p: DelayParams, warn: bool = True):
    """Second-order averaged probability (Gaussian-envelope regime)."""
    t = np.asarray(t, dtype=float)
    if warn and p.tau > 0:
        _check_window(t, p)
    g, tau = p.g, p.tau
    big_t = t * p.time_factor
    ph = 2 * g * big_t
    return (0.5 + 0.5 * np.cos(ph) - big_t * tau**2 * g**3 / 6 * np.sin(ph)
            - tau**2 * big_t**2 * g**4 / 9 * np.cos(ph))


def order3_probability(t, p: DelayParams):
    """Reconstructed next order: the terms of 1/2 + 1/2 e^{-x} cos(2gT + d)
    quadratic in (x, d), with x = (2/9) T^2 tau^2 g^4 and d = T tau^2 g^3 / 3,
    added to :func:`approx_probability`."""
    t = np.asarray(t, dtype=float)
    g, tau = p.g, p.tau
    big_t = t * p.time_factor
    ph = 2 * g * big_t
    x = 2.0 / 9.0 * big_t**2 * tau**2 * g**4
    d = big_t * tau**2 * g**3 / 3
    extra = 0.5 * ((x**2 - d**2) / 2 * np.cos(ph) + x * d * np.sin(ph))
    return approx_probability(t, p, warn=False) + extra


def predicted_envelope(p: DelayParams, t: float | None = None) -> dict:
    """Gaussian decay rate and the two candidate oscillation rates.

    The envelope is exp(-(r t)^2) with r = sqrt(2/9) g^2 (1 - gamma tau) tau.
    Frequencies are rates of the phase g_eff t (p oscillates at 2 g_eff).
    """
    if t is not None:
        _check_window(t, p)
    f = p.time_factor
    return {
        "gaussian_rate": np.sqrt(2.0 / 9.0) * p.g**2 * f * p.tau,
        "gaussian_exponent": 2.0 / 9.0 * p.tau**2 * p.g**4 * f**2,
        "frequency_sixth": (p.g + p.g**3 * p.tau**2 / 6) * f,
        "frequency_third": (p.g + p.g**3 * p.tau**2 / 3) * f,
    }


def sample_intervals(t: float, p: DelayParams, rng: np.random.Generator):
    """Poisson(gamma T) jumps uniformly on [0, T], T = t(1 - gamma tau).

    Returns (intervals ending in a jump, tail after the last one).
    """
    big_t = t * p.time_factor
    n = rng.poisson(p.gamma * big_t)
    marks = np.sort(rng.uniform(0.0, big_t, n))
    intervals = np.diff(np.concatenate([[0.0], marks]))
    tail = big_t - marks[-1] if n else big_t
    return intervals, tail


def _log_products(intervals, tail, p):
    if intervals.size == 0:
        return 0.0, 0.0, 2 * p.g * tail
    a, b = a_coeff(intervals, p), b_coeff(intervals, p)
    with np.errstate(divide="ignore"):
        la = np.sum(np.log(np.abs(a)))
        lb = np.sum(np.log(np.abs(b)))
    return la, lb, np.sum(np.angle(b) - np.angle(a)) + 2 * p.g * tail


def resampled_probability(t: float, p: DelayParams, n_samples: int, seed: int = 0,
                          weighted: bool = False) -> tuple[float, float]:
    """Monte-Carlo average of the product formula over random jump records.

    ``weighted=False`` averages the formula over records drawn as in
    :func:`sample_intervals`.  ``weighted=True`` reweights each record by
    its relative probability (|prod a|^2 + |prod b|^2)/2, normalized per jump
    so that the mean weight is close to one.  Returns (mean, stderr).
    """
    rng = np.random.default_rng(seed)
    log_norm = _mean_log_weight(p)
    probs = np.empty(n_samples)
    logw = np.empty(n_samples)
    for i in range(n_samples):
        intervals, tail = sample_intervals(t, p, rng)
        la, lb, ph = _log_products(intervals, tail, p)
        probs[i] = _combine(la, lb, ph)
        m = max(la, lb)
        logw[i] = (2 * m + np.log(0.5 * (np.exp(2 * (la - m)) + np.exp(2 * (lb - m))))
                   - intervals.size * log_norm)
    if not weighted:
        return float(probs.mean()), float(probs.std(ddof=1) / np.sqrt(n_samples))
    w = np.exp(logw - logw.max())
    w /= w.mean()
    mean = float(np.sum(w * probs) / n_samples)
    se = float(np.sqrt(np.mean((w * (probs - mean)) ** 2) / n_samples))
    return mean, se


def _mean_log_weight(p: DelayParams) -> float:
    """log of E[|a(t)|^2] for t ~ Exp(gamma), by quadrature on a fixed grid."""
    if p.gamma == 0:
        return 0.0
    x, w = np.polynomial.laguerre.laggauss(60)
    return float(np.log(np.sum(w * np.abs(a_coeff(x / p.gamma, p)) ** 2)))


def equal_spacing_probability(t, p: DelayParams):
    """Product formula with every interval equal to the mean 1/gamma."""
    out = []
    for tt in np.atleast_1d(t):
        big_t = tt * p.time_factor
        n = int(np.floor(p.gamma * big_t))
        if n == 0:
            out.append(0.5 + 0.5 * np.cos(2 * p.g * big_t))
            continue
        tail = big_t - n / p.gamma
        out.append(exact_probability(np.full(n, 1.0 / p.gamma), p, tail=tail))
    return np.array(out)


def fig2_curves(t_grid, p: DelayParams, n_samples: int = 2000, seed: int = 0,
                weighted: bool = False) -> dict:
    """Columns for the delayed-correction figure: Monte-Carlo average of the
    product formula, second order, reconstructed third order, and the
    equal-spacing evaluation."""
    t_grid = np.asarray(t_grid, dtype=float)
    exact, err = [], []
    for k, t in enumerate(t_grid):
        m, s = resampled_probability(t, p, n_samples, seed=seed + k, weighted=weighted)
        exact.append(m)
        err.append(s)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ValidityWarning)
        p2 = approx_probability(t_grid, p)
    return {
        "t": t_grid,
        "p_exact": np.array(exact),
        "p_exact_stderr": np.array(err),
        "p_order2": p2,
        "p_order3": order3_probability(t_grid, p),
        "p_equal_spacing": equal_spacing_probability(t_grid, p),
    }
