"""Atomic-qubit evolution after the photon has left: Larmor precession and
Gaussian dephasing from magnetic-field noise.

Times are in microseconds, frequencies in Hz.  Both maps act on the atom,
which is the second tensor factor of a two-qubit state (or the whole state
for a 2x2 input).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qstate
from ._validation import check_positive, check_rng, check_square


@dataclass(frozen=True)
class LarmorParams:
    nu_l: float = 200e3
    tau_gauss: float = 206.0

    def __post_init__(self):
        check_positive(self.nu_l, "nu_l")
        check_positive(self.tau_gauss, "tau_gauss")

    def phase(self, t):
        """Precession angle 2*pi*nu_L*t for t in microseconds."""
        return 2 * np.pi * self.nu_l * t * 1e-6

    @property
    def period_us(self):
        return 1e6 / self.nu_l


def _atom_operator(op, dim):
    return op if dim == 2 else np.kron(qstate.IDENTITY_2, op)


def larmor_evolve(rho, t, params=LarmorParams()):
    """Apply diag(1, exp(i 2 pi nu_L t)) to the atomic qubit.

    This rotates the atomic Bloch vector by +2 pi nu_L t about z.
    """
    rho = check_square(rho, "rho")
    u = _atom_operator(np.diag([1.0, np.exp(1j * params.phase(t))]), rho.shape[0])
    return u @ rho @ u.conj().T


def coherence_factor(t, params=LarmorParams()):
    """exp(-(t / tau)^2), the surviving fraction of atomic up/down coherence."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("delay must be non-negative")
    return np.exp(-((np.asarray(t, dtype=float) / params.tau_gauss) ** 2))


def gaussian_dephase(rho, t, params=LarmorParams()):
    """Scale atomic coherences by ``coherence_factor(t)``; populations stay."""
    rho = check_square(rho, "rho")
    d = float(coherence_factor(t, params))
    atom_index = np.arange(rho.shape[0]) % 2
    mask = np.where(atom_index[:, None] == atom_index[None, :], 1.0, d)
    return rho * mask


def _compensated_atom_axis(label, azimuth):
    """Pauli axis for the atom, rotated about z by ``azimuth``."""
    x, y, z = qstate.PAULI_AXES[label]
    c, s = np.cos(azimuth), np.sin(azimuth)
    return np.array([c * x - s * y, s * x + c * y, z])


def correlation_parameter(rho, atom_phase=0.0):
    """C_ap = P(up,H) + P(down,V) - P(up,V) - P(down,H).

    The photon is measured in H/V (the photon x axis) and the atom along the
    equatorial axis at azimuth ``atom_phase``; ``up`` labels its + outcome.
    """
    probs = qstate.measure_prob(
        rho, qstate.PAULI_AXES["x"], np.array([np.cos(atom_phase), np.sin(atom_phase), 0.0])
    )
    # outcome order: (H,up), (H,down), (V,up), (V,down)
    return float(probs[0] + probs[3] - probs[1] - probs[2])


def evolve(rho, t, params=LarmorParams()):
    return gaussian_dephase(larmor_evolve(rho, t, params), t, params)


# Bell fidelity against (|01> + |10>)/sqrt(2) in terms of Pauli correlators:
# F = (1 + <XX> + <YY> - <ZZ>) / 4.
FIDELITY_SETTINGS = (("x", "x", +1.0), ("y", "y", +1.0), ("z", "z", -1.0))


def compensated_setting_probs(rho, t, params=LarmorParams()):
    """Outcome probabilities of the three fidelity settings, with the atomic
    axes rotated to follow the precession accumulated after ``t``."""
    phi = params.phase(t)
    return np.array([
        qstate.measure_prob(rho, qstate.PAULI_AXES[p], _compensated_atom_axis(a, phi))
        for p, a, _ in FIDELITY_SETTINGS
    ])


def fidelity_from_setting_counts(counts):
    """Bell fidelity and its standard error from (3, 4) outcome counts of the
    XX, YY, ZZ settings."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=1)
    corr = (counts[:, 0] - counts[:, 1] - counts[:, 2] + counts[:, 3]) / n
    signs = np.array([s for _, _, s in FIDELITY_SETTINGS])
    fid = 0.25 * (1 + np.dot(signs, corr))
    var = np.sum((1 - corr**2) / n) / 16
    return float(fid), float(np.sqrt(var))


def fidelity_vs_delay(params, f0, delays, trials=None, random_state=None):
    """Bell fidelity after each delay, measured in the precession-compensated basis.

    Returns a list of dicts with ``delay_us`` and ``fidelity_analytic``; when
    ``trials`` is given each setting is also sampled ``trials`` times and the
    record gains ``fidelity_mc`` with a 1-sigma interval.
    """
    if not 0.25 <= f0 <= 1.0:
        raise ValueError(f"f0 must lie in [0.25, 1], got {f0}")
    rho0 = qstate.werner(qstate.white_noise_weight(f0))
    target = qstate.bell_state_psi()
    rng = check_rng(random_state) if trials else None
    records = []
    for t in delays:
        rho_t = evolve(rho0, t, params)
        # Undoing the precession on the state is the same as rotating the
        # atomic measurement basis along with it.
        unwound = larmor_evolve(rho_t, -t, params)
        rec = {"delay_us": float(t), "fidelity_analytic": qstate.fidelity_with_pure(unwound, target)}
        if trials:
            probs = compensated_setting_probs(rho_t, t, params)
            counts = np.array([rng.multinomial(trials, p) for p in probs])
            fid, se = fidelity_from_setting_counts(counts)
            rec.update(fidelity_mc=fid, ci_low=fid - se, ci_high=fid + se)
        records.append(rec)
    return records
