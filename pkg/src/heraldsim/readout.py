"""Atomic-qubit readout chain.

A measurement along an arbitrary axis is a microwave pi pulse moving |up> to
the F=1 state |i>, a rotation on |i> <-> |down> that sets the basis, and a
cavity-enhanced fluorescence window in which F=2 scatters photons (bright)
and F=1 stays nearly dark.  The counts are thresholded; F=1 maps to the
``up`` outcome and F=2 to ``down``.

MW pulse imperfections are depolarizing errors on the atomic qubit.
Fluorescence counts are Poissonian with means proportional to the window
length.  Unless a fixed integer ``threshold`` is given, the count threshold
is the one that maximizes the average state-assignment fidelity for the
window in use.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.stats import poisson
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import qstate
from ._validation import check_positive, check_probability, check_rng, check_square

F1 = "F1"
F2 = "F2"
UP = "up"
DOWN = "down"

REFERENCE_DURATION_US = 7.5
BRIGHT_MEAN_AT_REF = 20.0
TARGET_READOUT_FIDELITY = 0.990
# Dark-state mean counts in the 7.5 us window for which the optimally
# thresholded readout has average fidelity 0.990 (see calibrate_dark_mean).
DARK_MEAN_AT_REF = 4.712498582149337
_MAX_THRESHOLD = 10_000


@dataclass(frozen=True)
class RabiParams:
    """Driven two-level MW transition.

    ``omega`` is the Rabi angular frequency in rad/us; ``contrast`` is the
    maximal transferred population, used as the pulse fidelity.
    """

    omega: float = 2 * np.pi * 0.025
    contrast: float = 0.95
    transition: str = "i_up"

    def __post_init__(self):
        check_positive(self.omega, "omega")
        check_probability(self.contrast, "contrast")
        if self.transition not in ("i_up", "i_down"):
            raise ValueError(f"transition must be 'i_up' or 'i_down', got {self.transition!r}")

    @property
    def error_rate(self):
        return 1.0 - self.contrast

    @property
    def pi_time(self):
        return np.pi / self.omega


PI_TRANSFER = RabiParams(contrast=0.95, transition="i_up")
BASIS_ROTATION = RabiParams(contrast=0.96, transition="i_down")


@dataclass(frozen=True)
class ReadoutParams:
    """Fluorescence detection settings (rates per us, durations in us).

    ``threshold=None`` selects the fidelity-optimal threshold for
    ``duration``.  ``heating_time`` optionally lets the bright scattering
    rate decay exponentially during the window.
    """

    bright_rate: float = BRIGHT_MEAN_AT_REF / REFERENCE_DURATION_US
    dark_mean_at_ref: float = DARK_MEAN_AT_REF
    duration: float = REFERENCE_DURATION_US
    threshold: int | None = None
    heating_time: float | None = None

    def __post_init__(self):
        check_positive(self.bright_rate, "bright_rate", strict=False)
        check_positive(self.dark_mean_at_ref, "dark_mean_at_ref", strict=False)
        check_positive(self.duration, "duration")
        if self.threshold is not None and (int(self.threshold) != self.threshold or self.threshold < 1):
            raise ValueError(f"threshold must be an integer >= 1, got {self.threshold}")
        if self.heating_time is not None:
            check_positive(self.heating_time, "heating_time")

    def mean_counts(self, hyperfine):
        if hyperfine == F2:
            if self.heating_time is None:
                return self.bright_rate * self.duration
            th = self.heating_time
            return self.bright_rate * th * (1 - np.exp(-self.duration / th))
        if hyperfine == F1:
            return self.dark_mean_at_ref * self.duration / REFERENCE_DURATION_US
        raise ValueError(f"hyperfine must be {F1!r} or {F2!r}, got {hyperfine!r}")


def rabi_population(t, params):
    """Transferred population (contrast/2) * (1 - cos(omega t))."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("pulse duration must be non-negative")
    return params.contrast / 2 * (1 - np.cos(params.omega * t))


def rotation_unitary(theta, phi):
    """exp(-i theta/2 (cos(phi) X + sin(phi) Y))."""
    n_sigma = np.cos(phi) * qstate.SIGMA_X + np.sin(phi) * qstate.SIGMA_Y
    return np.cos(theta / 2) * qstate.IDENTITY_2 - 1j * np.sin(theta / 2) * n_sigma


def _depolarize_atom(rho, error_rate):
    if error_rate == 0:
        return rho
    if rho.shape[0] == 2:
        return (1 - error_rate) * rho + error_rate * qstate.IDENTITY_2 / 2
    rho_p = qstate.partial_trace(rho, qstate.PHOTON)
    return (1 - error_rate) * rho + error_rate * np.kron(rho_p, qstate.IDENTITY_2 / 2)


def mw_rotation(rho, theta, phi, error_rate=0.0):
    """Rotate the atomic qubit by ``theta`` about the equatorial axis at
    azimuth ``phi``; with probability ``error_rate`` the atom is instead left
    maximally mixed."""
    rho = check_square(rho, "rho")
    error_rate = check_probability(error_rate, "error_rate")
    u = rotation_unitary(theta, phi)
    if rho.shape[0] == 4:
        u = np.kron(qstate.IDENTITY_2, u)
    return _depolarize_atom(u @ rho @ u.conj().T, error_rate)


def basis_rotation_angles(axis):
    """(theta, phi) of the MW rotation that maps the Bloch ``axis`` onto +z."""
    axis = qstate._as_axis(axis)
    theta = float(np.arccos(np.clip(axis[2], -1.0, 1.0)))
    azimuth = float(np.arctan2(axis[1], axis[0])) if theta > 1e-15 else 0.0
    return theta, azimuth - np.pi / 2


def fluorescence_counts(hyperfine, params=ReadoutParams(), random_state=None, size=None):
    rng = check_rng(random_state)
    return rng.poisson(params.mean_counts(hyperfine), size=size)


def _misreads(params, threshold):
    """(P(F1 read as F2), P(F2 read as F1)) for counts >= threshold -> F2."""
    lam_d, lam_b = params.mean_counts(F1), params.mean_counts(F2)
    return float(poisson.sf(threshold - 1, lam_d)), float(poisson.cdf(threshold - 1, lam_b))


def optimal_threshold(params=ReadoutParams()):
    """Integer threshold maximizing the average assignment fidelity.

    The bright/dark likelihood ratio exp(lam_d - lam_b) (lam_b/lam_d)^k
    grows with the count k, so the optimum is the first k where it reaches
    one.
    """
    lam_d, lam_b = params.mean_counts(F1), params.mean_counts(F2)
    if lam_b <= lam_d:
        raise ValueError(f"bright mean {lam_b:.4g} must exceed dark mean {lam_d:.4g} for threshold detection")
    if lam_d == 0:
        return 1
    k = int(np.ceil((lam_b - lam_d) / np.log(lam_b / lam_d) - 1e-12))
    return min(max(k, 1), _MAX_THRESHOLD)


def resolved_threshold(params=ReadoutParams()):
    return optimal_threshold(params) if params.threshold is None else int(params.threshold)


def misread_probabilities(params=ReadoutParams()):
    return _misreads(params, resolved_threshold(params))


def discriminate(counts, params=ReadoutParams()):
    """``F2`` if counts reach the threshold, else ``F1``.  Arrays map elementwise."""
    thr = resolved_threshold(params)
    c = np.asarray(counts)
    if c.ndim == 0:
        return F2 if c >= thr else F1
    return np.where(c >= thr, F2, F1)


def readout_fidelity(params=ReadoutParams()):
    e_dark, e_bright = misread_probabilities(params)
    return 1.0 - 0.5 * (e_dark + e_bright)


def readout_fidelity_vs_duration(durations, params=ReadoutParams()):
    out = []
    for d in durations:
        if d <= 0:
            raise ValueError("durations must be positive")
        out.append(readout_fidelity(replace(params, duration=float(d))))
    return out


def calibrate_dark_mean(target=TARGET_READOUT_FIDELITY, params=ReadoutParams()):
    """Dark mean counts at the reference window giving ``target`` fidelity."""

    def gap(dark):
        return readout_fidelity(replace(params, dark_mean_at_ref=dark)) - target

    # equal means give fidelity 1/2, so just below the bright mean brackets the root
    hi = params.mean_counts(F2) * (1 - 1e-9)
    if gap(0.0) < 0:
        raise ValueError("target fidelity unreachable even with zero dark counts")
    return float(brentq(gap, 0.0, hi, xtol=1e-14))


def count_histogram(params=ReadoutParams(), trials=10_000, random_state=None):
    """Sampled count histograms for both hyperfine states.

    Returns ``(counts, frequency_bright, frequency_dark)`` arrays.
    """
    rng = check_rng(random_state)
    bright = fluorescence_counts(F2, params, rng, size=trials)
    dark = fluorescence_counts(F1, params, rng, size=trials)
    top = int(max(bright.max(), dark.max()))
    edges = np.arange(top + 1)
    fb = np.bincount(bright, minlength=top + 1) / trials
    fd = np.bincount(dark, minlength=top + 1) / trials
    return edges, fb, fd


class ThresholdDiscriminator(ClassifierMixin, BaseEstimator):
    """Learn a photon-count threshold from labelled calibration shots.

    Parameters
    ----------
    max_threshold : int, default=200
        Largest threshold considered.

    Attributes
    ----------
    threshold_ : int
        Counts at or above this value are classified as ``F2``.
    classes_ : ndarray of str
        ``["F1", "F2"]``.
    """

    def __init__(self, max_threshold=200):
        self.max_threshold = max_threshold

    def fit(self, X, y):
        counts = check_array(X, ensure_2d=False, dtype=np.int64).ravel()
        y = np.asarray(y)
        if set(np.unique(y)) - {F1, F2}:
            raise ValueError("labels must be 'F1' or 'F2'")
        bright = y == F2
        if bright.all() or not bright.any():
            raise ValueError("calibration needs shots from both hyperfine states")
        thresholds = np.arange(1, self.max_threshold + 1)
        # Balanced accuracy for every candidate threshold at once.
        tpr = (counts[bright][None, :] >= thresholds[:, None]).mean(axis=1)
        tnr = (counts[~bright][None, :] < thresholds[:, None]).mean(axis=1)
        self.threshold_ = int(thresholds[np.argmax(0.5 * (tpr + tnr))])
        self.classes_ = np.array([F1, F2])
        return self

    def predict(self, X):
        check_is_fitted(self, "threshold_")
        counts = check_array(X, ensure_2d=False, dtype=np.int64).ravel()
        return np.where(counts >= self.threshold_, F2, F1)

    def score(self, X, y):
        """Average of the two per-state assignment fidelities."""
        pred = self.predict(X)
        y = np.asarray(y)
        return 0.5 * ((pred[y == F1] == F1).mean() + (pred[y == F2] == F2).mean())


def mw_error_rates(rabi=(PI_TRANSFER, BASIS_ROTATION), readout=ReadoutParams(),
                   attribute_full_error=True):
    """Depolarizing error rates of the transfer and rotation pulses.

    The quoted pulse fidelities already contain state-detection errors; by
    default the whole infidelity is charged to the pulse.  Otherwise the
    detection share is divided out first.
    """
    transfer, rotation = rabi
    if attribute_full_error:
        return transfer.error_rate, rotation.error_rate
    f_det = readout_fidelity(readout)
    return (max(0.0, 1 - transfer.contrast / f_det), max(0.0, 1 - rotation.contrast / f_det))


def atom_povm(axis, rabi=(PI_TRANSFER, BASIS_ROTATION), readout=ReadoutParams(),
              attribute_full_error=True):
    """Effective POVM elements (E_up, E_down) of the full measurement chain.

    Each depolarizing step shrinks the measured Bloch component; the final
    threshold decision mixes the two projectors with the misread rates.
    """
    axis = qstate._as_axis(axis)
    e_transfer, e_rot = mw_error_rates(rabi, readout, attribute_full_error)
    theta, _ = basis_rotation_angles(axis)
    shrink = (1 - e_transfer) * ((1 - e_rot) if theta > 1e-15 else 1.0)
    e_dark, e_bright = misread_probabilities(readout)
    n_sigma = axis[0] * qstate.SIGMA_X + axis[1] * qstate.SIGMA_Y + axis[2] * qstate.SIGMA_Z
    plus = 0.5 * (qstate.IDENTITY_2 + shrink * n_sigma)
    minus = qstate.IDENTITY_2 - plus
    e_up = (1 - e_dark) * plus + e_bright * minus
    return e_up, qstate.IDENTITY_2 - e_up


def atom_up_probability(rho, basis, rabi=(PI_TRANSFER, BASIS_ROTATION), readout=ReadoutParams(),
                        attribute_full_error=True):
    rho = check_square(rho, "rho")
    rho_a = qstate.partial_trace(rho, qstate.ATOM) if rho.shape[0] == 4 else rho
    e_up, _ = atom_povm(basis, rabi, readout, attribute_full_error)
    return float(np.clip(np.trace(rho_a @ e_up).real, 0.0, 1.0))


def atom_measurement(rho, basis, rabi=(PI_TRANSFER, BASIS_ROTATION), readout=ReadoutParams(),
                     random_state=None, attribute_full_error=True, size=None):
    """Sample an outcome (``"up"`` or ``"down"``) of the full readout chain.

    With ``size`` set, returns an array of that many independent outcomes.
    """
    rng = check_rng(random_state)
    p_up = atom_up_probability(rho, basis, rabi, readout, attribute_full_error)
    if size is None:
        return UP if rng.random() < p_up else DOWN
    return np.where(rng.random(size) < p_up, UP, DOWN)
