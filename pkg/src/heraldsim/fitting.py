"""Least-squares curve fits used to read time constants off simulated scans."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.optimize import OptimizeWarning, curve_fit
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, column_or_1d


class FitError(RuntimeError):
    """Raised when a fit is degenerate or does not converge."""


def _xy(t, y, min_points):
    t, y = check_X_y(np.asarray(t, dtype=float).reshape(-1, 1), y, y_numeric=True)
    t = t.ravel()
    if t.size < min_points:
        raise FitError(f"need at least {min_points} points, got {t.size}")
    order = np.argsort(t)
    return t[order], y[order]


def _cosine(t, offset, amplitude, period, phase):
    return offset + amplitude * np.cos(2 * np.pi * t / period + phase)


def _gaussian_decay(t, floor, amplitude, tau):
    return floor + amplitude * np.exp(-((t / tau) ** 2))


class CosineFit(RegressorMixin, BaseEstimator):
    """Fit ``offset + amplitude * cos(2 pi t / period + phase)``.

    The starting period comes from the strongest periodogram peak on a
    resampled uniform grid.

    Parameters
    ----------
    min_relative_amplitude : float, default=1e-6
        Fits whose amplitude is below this fraction of the data scale are
        treated as degenerate.
    """

    def __init__(self, min_relative_amplitude=1e-6):
        self.min_relative_amplitude = min_relative_amplitude

    def fit(self, t, y):
        t, y = _xy(t, y, 8)
        scale = max(np.ptp(y), np.abs(y).max(), 1e-300)
        if np.ptp(y) <= self.min_relative_amplitude * scale:
            raise FitError("input is constant: no oscillation to fit")

        grid = np.linspace(t[0], t[-1], 4 * t.size)
        resampled = np.interp(grid, t, y) - y.mean()
        spectrum = np.abs(np.fft.rfft(resampled, n=16 * grid.size))
        freqs = np.fft.rfftfreq(16 * grid.size, d=grid[1] - grid[0])
        f0 = freqs[1 + np.argmax(spectrum[1:])]
        a0 = 0.5 * np.ptp(y)
        # Starting phase from a linear regression at the starting frequency.
        design = np.column_stack([np.cos(2 * np.pi * f0 * t), np.sin(2 * np.pi * f0 * t), np.ones_like(t)])
        (c, s, _), *_ = np.linalg.lstsq(design, y, rcond=None)
        p0 = [y.mean(), a0, 1 / f0, np.arctan2(-s, c)]
        try:
            with warnings.catch_warnings():
                # noiseless input leaves the covariance undefined; the fit itself is fine
                warnings.simplefilter("ignore", OptimizeWarning)
                popt, pcov = curve_fit(_cosine, t, y, p0=p0, maxfev=20_000, xtol=1e-12, ftol=1e-12)
        except RuntimeError as exc:
            raise FitError(f"cosine fit did not converge: {exc}") from exc

        offset, amplitude, period, phase = popt
        if amplitude < 0:
            amplitude, phase = -amplitude, phase + np.pi
        if period < 0:
            period, phase = -period, -phase
        if abs(amplitude) <= self.min_relative_amplitude * scale:
            raise FitError("fitted amplitude is zero")
        if t[-1] - t[0] < period:
            raise FitError(
                f"samples span {t[-1] - t[0]:.4g} but the fitted period is {period:.4g}; "
                "need at least one full period"
            )
        self.offset_ = float(offset)
        self.amplitude_ = float(amplitude)
        self.period_ = float(period)
        self.phase_ = float(np.angle(np.exp(1j * phase)))
        self.covariance_ = pcov
        self.residual_ = float(np.sqrt(np.mean((y - self.predict(t)) ** 2)))
        return self

    def predict(self, t):
        check_is_fitted(self, "period_")
        t = column_or_1d(np.asarray(t, dtype=float))
        return _cosine(t, self.offset_, self.amplitude_, self.period_, self.phase_)


class GaussianDecayFit(RegressorMixin, BaseEstimator):
    """Fit ``floor + amplitude * exp(-(t / tau)^2)``.

    Parameters
    ----------
    min_relative_amplitude : float, default=1e-6
        Decays smaller than this fraction of the data scale are flagged as
        degenerate.
    """

    def __init__(self, min_relative_amplitude=1e-6):
        self.min_relative_amplitude = min_relative_amplitude

    def fit(self, t, y):
        t, y = _xy(t, y, 6)
        scale = max(np.abs(y).max(), 1e-300)
        if np.ptp(y) <= self.min_relative_amplitude * scale:
            raise FitError("input is flat: no decay to fit")
        floor0, top = y.min(), y.max()
        a0 = top - floor0
        # first sample below floor + a/e marks roughly one decay time
        below = np.nonzero(y <= floor0 + a0 / np.e)[0]
        tau0 = t[below[0]] if below.size and t[below[0]] > 0 else 0.5 * (t[-1] - t[0])
        try:
            popt, pcov = curve_fit(
                _gaussian_decay, t, y, p0=[floor0, a0, tau0],
                bounds=([-np.inf, -np.inf, 1e-12], np.inf), maxfev=20_000, xtol=1e-12, ftol=1e-12,
            )
        except (RuntimeError, ValueError) as exc:
            raise FitError(
                f"Gaussian decay fit did not converge from p0={[floor0, a0, tau0]}: {exc}"
            ) from exc
        floor, amplitude, tau = popt
        if abs(amplitude) <= self.min_relative_amplitude * scale:
            raise FitError("fitted decay amplitude is zero")
        if not np.all(np.isfinite(pcov)):
            raise FitError(f"Gaussian decay fit is degenerate (tau={tau:.4g}, covariance not finite)")
        self.floor_ = float(floor)
        self.amplitude_ = float(amplitude)
        self.tau_ = float(tau)
        self.covariance_ = pcov
        self.residual_ = float(np.sqrt(np.mean((y - self.predict(t)) ** 2)))
        return self

    def predict(self, t):
        check_is_fitted(self, "tau_")
        t = column_or_1d(np.asarray(t, dtype=float))
        return _gaussian_decay(t, self.floor_, self.amplitude_, self.tau_)


def fit_oscillation(points):
    """(period, amplitude, phase, residual) of a cosine through ``(t, value)`` pairs."""
    t, y = np.asarray(points, dtype=float).T
    fit = CosineFit().fit(t, y)
    return fit.period_, fit.amplitude_, fit.phase_, fit.residual_


def fit_gaussian_decay(points):
    """(tau, floor, residual) of a Gaussian decay through ``(t, value)`` pairs."""
    t, y = np.asarray(points, dtype=float).T
    fit = GaussianDecayFit().fit(t, y)
    return fit.tau_, fit.floor_, fit.residual_
