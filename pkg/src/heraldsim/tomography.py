"""Two-qubit state tomography from Pauli product measurements.

Counts are collected in the nine (photon axis, atom axis) settings drawn
from {x, y, z}.  The estimator inverts the Pauli correlators linearly,

    rho = 1/4 * sum_ij S_ij sigma_i (x) sigma_j,

with single-qubit terms pooled over every setting that shares the axis, and
then projects the spectrum onto the probability simplex to obtain a
physical state.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import qstate, readout
from ._validation import check_density_matrix, check_rng

PAULI_LABELS = ("x", "y", "z")
PAULI_PAIRS = tuple(itertools.product(PAULI_LABELS, PAULI_LABELS))
IDEAL = "ideal"
FULL_READOUT = "full"

# Sign of each outcome (++, +-, -+, --) for the photon, atom and product.
_SIGN_P = np.array([1, 1, -1, -1])
_SIGN_A = np.array([1, -1, 1, -1])
_SIGN_PA = _SIGN_P * _SIGN_A


@dataclass(frozen=True)
class TomographySettings:
    shots_per_basis: int = 10_000
    bases: tuple = PAULI_PAIRS
    seed: int | None = None

    def __post_init__(self):
        if self.shots_per_basis < 1:
            raise ValueError("shots_per_basis must be >= 1")
        if not self.bases:
            raise ValueError("bases must be non-empty")


@dataclass
class CountsTable:
    """Outcome counts per measurement setting.

    ``counts[k]`` holds the (++, +-, -+, --) counts for ``bases[k]``; the
    first sign is the photon outcome.
    """

    bases: tuple
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.bases = tuple(tuple(b) for b in self.bases)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != (len(self.bases), 4):
            raise ValueError(f"counts must have shape ({len(self.bases)}, 4), got {self.counts.shape}")
        if (self.counts < 0).any():
            raise ValueError("counts must be non-negative")

    @property
    def shots(self):
        return self.counts.sum(axis=1)

    def frequencies(self):
        shots = self.shots
        if (shots == 0).any():
            raise ValueError("every setting needs at least one shot")
        return self.counts / shots[:, None]

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["photon_axis", "atom_axis", "outcome_p", "outcome_a", "count"])
            for (pa, aa), row in zip(self.bases, self.counts):
                for (op, oa), c in zip(qstate.OUTCOMES, row):
                    writer.writerow([pa, aa, op, oa, int(c)])
        return path

    @classmethod
    def from_csv(cls, path):
        order = {o: i for i, o in enumerate(qstate.OUTCOMES)}
        table = {}
        with Path(path).open(newline="") as fh:
            for r in csv.DictReader(fh):
                key = (r["photon_axis"], r["atom_axis"])
                table.setdefault(key, np.zeros(4, dtype=np.int64))
                table[key][order[(r["outcome_p"], r["outcome_a"])]] += int(r["count"])
        bases = tuple(table)
        return cls(bases, np.array([table[b] for b in bases]))


def setting_probabilities(rho, bases=PAULI_PAIRS, chain=IDEAL, rabi=None, readout_params=None):
    """Outcome distributions for each setting, shape (len(bases), 4).

    With ``chain="full"`` the atomic projectors are replaced by the POVM of
    the MW + fluorescence readout chain.
    """
    rho = check_density_matrix(rho, dims=(4,))
    if chain == IDEAL:
        return np.array([qstate.measure_prob(rho, pa, aa) for pa, aa in bases])
    if chain != FULL_READOUT:
        raise ValueError(f"chain must be {IDEAL!r} or {FULL_READOUT!r}, got {chain!r}")
    rabi = (readout.PI_TRANSFER, readout.BASIS_ROTATION) if rabi is None else rabi
    readout_params = readout.ReadoutParams() if readout_params is None else readout_params
    out = []
    for pa, aa in bases:
        e_up, e_down = readout.atom_povm(qstate.PAULI_AXES[aa], rabi, readout_params)
        p_plus, p_minus = qstate.projector(pa, +1), qstate.projector(pa, -1)
        probs = [np.trace(rho @ np.kron(p, e)).real for p in (p_plus, p_minus) for e in (e_up, e_down)]
        probs = np.clip(probs, 0.0, 1.0)
        out.append(probs / probs.sum())
    return np.array(out)


def simulate_counts(rho, settings=TomographySettings(), chain=IDEAL, random_state=None, **chain_kw):
    """Multinomial counts for every setting in ``settings.bases``."""
    rng = check_rng(settings.seed if random_state is None else random_state)
    probs = setting_probabilities(rho, settings.bases, chain, **chain_kw)
    counts = np.array([rng.multinomial(settings.shots_per_basis, p) for p in probs])
    return CountsTable(settings.bases, counts)


def _require_complete(bases):
    missing = set(PAULI_PAIRS) - set(bases)
    if missing:
        raise ValueError(f"tomography needs all nine Pauli settings; missing {sorted(missing)}")


_PAULI_PRODUCTS = {
    (i, j): np.kron(qstate.PAULI[i], qstate.PAULI[j]) for i in "ixyz" for j in "ixyz"
}


def _invert(freqs, bases):
    """Linear inversion on frequencies of shape (..., len(bases), 4)."""
    freqs = np.asarray(freqs, dtype=float)
    rho = np.zeros(freqs.shape[:-2] + (4, 4), dtype=complex)
    rho += _PAULI_PRODUCTS[("i", "i")]
    photon_marg = {a: [] for a in PAULI_LABELS}
    atom_marg = {a: [] for a in PAULI_LABELS}
    for k, (pa, aa) in enumerate(bases):
        f = freqs[..., k, :]
        corr = f @ _SIGN_PA
        if (pa, aa) in _PAULI_PRODUCTS and pa in PAULI_LABELS and aa in PAULI_LABELS:
            rho += corr[..., None, None] * _PAULI_PRODUCTS[(pa, aa)]
        photon_marg[pa].append(f @ _SIGN_P)
        atom_marg[aa].append(f @ _SIGN_A)
    for a in PAULI_LABELS:
        rho += np.mean(photon_marg[a], axis=0)[..., None, None] * _PAULI_PRODUCTS[(a, "i")]
        rho += np.mean(atom_marg[a], axis=0)[..., None, None] * _PAULI_PRODUCTS[("i", a)]
    return rho / 4


def linear_inversion(counts):
    """Hermitian, unit-trace estimate of the state (possibly not PSD)."""
    _require_complete(counts.bases)
    keep = [k for k, b in enumerate(counts.bases) if b in PAULI_PAIRS]
    bases = [counts.bases[k] for k in keep]
    return _invert(counts.frequencies()[keep], bases)


def invert_probabilities(probs, bases=PAULI_PAIRS):
    """Linear inversion applied directly to outcome distributions.

    ``probs`` has shape (..., len(bases), 4).  On exact distributions this
    returns the generating state.
    """
    _require_complete(bases)
    bases = [tuple(b) for b in bases]
    keep = [k for k, b in enumerate(bases) if b in PAULI_PAIRS]
    return _invert(np.asarray(probs)[..., keep, :], [bases[k] for k in keep])


def _project_simplex(v):
    """Euclidean projection of each row of ``v`` onto the probability simplex."""
    u = -np.sort(-v, axis=-1)
    css = np.cumsum(u, axis=-1) - 1.0
    idx = np.arange(1, v.shape[-1] + 1)
    r = (u - css / idx > 0).sum(axis=-1, keepdims=True)
    theta = np.take_along_axis(css, r - 1, axis=-1) / r
    return np.maximum(v - theta, 0.0)


def project_physical(m):
    """Closest density matrix in Frobenius norm to a Hermitian, unit-trace ``m``.

    Works on a single matrix or a stack of matrices.
    """
    m = np.asarray(m, dtype=complex)
    if not np.allclose(m, np.swapaxes(m.conj(), -1, -2), rtol=0.0, atol=1e-9):
        raise ValueError("input is not Hermitian")
    m = 0.5 * (m + np.swapaxes(m.conj(), -1, -2))
    evals, evecs = np.linalg.eigh(m)
    w = _project_simplex(evals)
    out = (evecs * w[..., None, :]) @ np.swapaxes(evecs.conj(), -1, -2)
    return 0.5 * (out + np.swapaxes(out.conj(), -1, -2))


def trace_distance(a, b):
    return 0.5 * float(np.abs(np.linalg.eigvalsh(np.asarray(a) - np.asarray(b))).sum())


@dataclass(frozen=True)
class BellFidelity:
    estimate: float
    ci_low: float
    ci_high: float
    entangled: bool


class LinearInversionTomography(BaseEstimator):
    """Reconstruct a two-qubit state from a :class:`CountsTable`.

    Parameters
    ----------
    n_bootstrap : int, default=200
        Multinomial resamples used for confidence intervals.
    confidence : float, default=0.68
        Central coverage of the bootstrap percentile interval.
    random_state : int, Generator or None
        Seed for the bootstrap.

    Attributes
    ----------
    raw_matrix_ : ndarray of shape (4, 4)
        Linear-inversion estimate before projection.
    density_matrix_ : ndarray of shape (4, 4)
        Physical reconstruction.
    """

    def __init__(self, n_bootstrap=200, confidence=0.68, random_state=None):
        self.n_bootstrap = n_bootstrap
        self.confidence = confidence
        self.random_state = random_state

    def fit(self, counts, y=None):
        _require_complete(counts.bases)
        self.counts_ = counts
        self.raw_matrix_ = linear_inversion(counts)
        self.density_matrix_ = project_physical(self.raw_matrix_)
        return self

    def fidelity(self, target=None):
        check_is_fitted(self, "density_matrix_")
        target = qstate.bell_state_psi() if target is None else target
        return qstate.fidelity_with_pure(self.density_matrix_, target)

    def bootstrap_fidelities(self, target=None):
        """Fidelity of each resampled reconstruction."""
        check_is_fitted(self, "density_matrix_")
        target = qstate.bell_state_psi() if target is None else np.asarray(target, dtype=complex)
        rng = check_rng(self.random_state)
        counts = self.counts_
        freqs = counts.frequencies()
        samples = np.stack(
            [rng.multinomial(n, f, size=self.n_bootstrap) for n, f in zip(counts.shots, freqs)],
            axis=1,
        ) / counts.shots[None, :, None]
        keep = [k for k, b in enumerate(counts.bases) if b in PAULI_PAIRS]
        rhos = project_physical(_invert(samples[:, keep], [counts.bases[k] for k in keep]))
        return np.einsum("i,nij,j->n", target.conj(), rhos, target).real

    def fidelity_interval(self, target=None):
        est = self.fidelity(target)
        boot = self.bootstrap_fidelities(target)
        tail = (1 - self.confidence) / 2
        lo, hi = np.quantile(boot, [tail, 1 - tail])
        # The percentile interval can miss a biased point estimate near the
        # physical boundary; widen it to keep the estimate inside.
        lo, hi = float(min(lo, est)), float(max(hi, est))
        return BellFidelity(est, lo, hi, lo > 0.5)


def fidelity_with_bell(counts, n_bootstrap=200, confidence=0.68, random_state=None):
    """Bell fidelity of the reconstructed state with a bootstrap interval.

    ``entangled`` is set when the lower bound exceeds 1/2.
    """
    est = LinearInversionTomography(n_bootstrap, confidence, random_state).fit(counts)
    return est.fidelity_interval()


def write_real_part_csv(matrix, path):
    """Real parts as (row, col, ket_row, ket_col, value) for bar-chart plots."""
    labels = ["R,up", "R,down", "L,up", "L,down"]
    m = np.asarray(matrix)
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "ket_row", "ket_col", "re"])
        for i in range(4):
            for j in range(4):
                writer.writerow([i, j, labels[i], labels[j], f"{m[i, j].real:.17g}"])
    return path
