"""One- and two-qubit state algebra.

Two-qubit states are 4x4 complex arrays with the photon as the first tensor
factor and the atom as the second, in the basis order

    (|R,up>, |R,down>, |L,up>, |L,down>)

Single-qubit states put |R> (photon) or |up> (atom) first.  Polarization
states are related by |R> = (|H> + i|V>)/sqrt(2) and |L> = (|H> - i|V>)/sqrt(2),
which makes H/V the Bloch x axis of the photon with H on the positive side.

Density matrices are plain ``numpy`` arrays; every constructor here returns
an array that passes :func:`heraldsim._validation.check_density_matrix`.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import (
    check_axis,
    check_density_matrix,
    check_probability,
    check_pure_state,
    check_square,
)

PHOTON = "photon"
ATOM = "atom"

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
PAULI = {"i": IDENTITY_2, "x": SIGMA_X, "y": SIGMA_Y, "z": SIGMA_Z}

PAULI_AXES = {
    "x": np.array([1.0, 0.0, 0.0]),
    "y": np.array([0.0, 1.0, 0.0]),
    "z": np.array([0.0, 0.0, 1.0]),
}

# Outcome order used by measure_prob and the tomography counts tables.
OUTCOMES = (("+", "+"), ("+", "-"), ("-", "+"), ("-", "-"))

KET_R = np.array([1, 0], dtype=complex)
KET_L = np.array([0, 1], dtype=complex)
KET_UP = np.array([1, 0], dtype=complex)
KET_DOWN = np.array([0, 1], dtype=complex)
KET_H = (KET_R + KET_L) / np.sqrt(2)
KET_V = (KET_R - KET_L) / (1j * np.sqrt(2))


@dataclass(frozen=True)
class MeasurementBasis:
    """Projective qubit measurement along a Bloch-sphere axis.

    The ``+`` outcome projects onto the eigenstate along ``axis``.
    """

    qubit: str
    axis: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.qubit not in (PHOTON, ATOM):
            raise ValueError(f"qubit must be {PHOTON!r} or {ATOM!r}, got {self.qubit!r}")
        object.__setattr__(self, "axis", check_axis(self.axis))

    @classmethod
    def pauli(cls, qubit, label):
        return cls(qubit, PAULI_AXES[label])

    @classmethod
    def equatorial(cls, qubit, azimuth):
        return cls(qubit, np.array([np.cos(azimuth), np.sin(azimuth), 0.0]))

    def projectors(self):
        return projector(self.axis, +1), projector(self.axis, -1)


def _as_axis(basis):
    if isinstance(basis, MeasurementBasis):
        return basis.axis
    if isinstance(basis, str):
        return PAULI_AXES[basis]
    return check_axis(basis)


def projector(axis, sign=+1):
    """Projector (I + sign * n.sigma) / 2 for a unit Bloch vector n."""
    n = _as_axis(axis)
    n_sigma = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    return 0.5 * (IDENTITY_2 + sign * n_sigma)


def bell_state_psi():
    """|Psi> = (|R,down> + |L,up>) / sqrt(2)."""
    return np.array([0, 1, 1, 0], dtype=complex) / np.sqrt(2)


def density_of(psi):
    psi = check_pure_state(psi)
    return np.outer(psi, psi.conj())


def maximally_mixed(dim=4):
    return np.eye(dim, dtype=complex) / dim


def tensor(a, b):
    a = check_square(a, "a", dims=(2,))
    b = check_square(b, "b", dims=(2,))
    return np.kron(a, b)


def partial_trace(rho, keep):
    """Reduce a two-qubit state to the ``keep`` qubit (``"photon"`` or ``"atom"``)."""
    rho = check_square(rho, "rho", dims=(4,))
    r = rho.reshape(2, 2, 2, 2)  # (photon, atom, photon', atom')
    if keep == ATOM:
        return np.einsum("iaib->ab", r)
    if keep == PHOTON:
        return np.einsum("aibi->ab", r)
    raise ValueError(f"keep must be {PHOTON!r} or {ATOM!r}, got {keep!r}")


def measure_prob(rho, photon_basis, atom_basis):
    """Joint outcome probabilities ``[P(+,+), P(+,-), P(-,+), P(-,-)]``.

    Bases may be :class:`MeasurementBasis` instances, Pauli labels
    (``"x"``, ``"y"``, ``"z"``) or unit 3-vectors.
    """
    rho = check_square(rho, "rho", dims=(4,))
    pp, pm = projector(photon_basis, +1), projector(photon_basis, -1)
    ap, am = projector(atom_basis, +1), projector(atom_basis, -1)
    probs = np.array(
        [np.trace(rho @ np.kron(p, a)).real for p in (pp, pm) for a in (ap, am)]
    )
    # Rounding can leave values like -1e-17; keep the outcome vector a distribution.
    probs = np.clip(probs, 0.0, 1.0)
    return probs / probs.sum()


def fidelity_with_pure(rho, target):
    """<psi|rho|psi> for a pure target state."""
    rho = check_square(rho, "rho")
    target = check_pure_state(target)
    if target.shape[0] != rho.shape[0]:
        raise ValueError("rho and target dimensions differ")
    return float(np.vdot(target, rho @ target).real)


def werner(weight):
    """Bell state mixed with white noise: weight |Psi><Psi| + (1 - weight) I/4."""
    weight = check_probability(weight, "weight")
    return weight * density_of(bell_state_psi()) + (1 - weight) * maximally_mixed(4)


def mix_with_white_noise(rho0, weight):
    """weight * rho0 + (1 - weight) * I/2 (x) Tr_photon(rho0).

    The photonic half of the noise term is maximally mixed while the atom
    keeps its reduced state, which is what a polarization-blind noise count
    paired with a real atomic measurement looks like.
    """
    rho0 = check_density_matrix(rho0, "rho0", dims=(4,))
    weight = check_probability(weight, "weight")
    rho_a = partial_trace(rho0, ATOM)
    return weight * rho0 + (1 - weight) * np.kron(IDENTITY_2 / 2, rho_a)


def bell_fidelity_with_noise(weight, f0):
    """Bell fidelity weight*f0 + (1 - weight)/4 of a state diluted by white noise."""
    weight = check_probability(weight, "weight")
    f0 = check_probability(f0, "f0")
    return weight * f0 + (1 - weight) / 4


def white_noise_weight(fidelity, f0=1.0):
    """Invert :func:`bell_fidelity_with_noise` for the signal weight."""
    if f0 <= 0.25:
        raise ValueError("f0 must exceed 1/4 for the inversion to be defined")
    weight = (fidelity - 0.25) / (f0 - 0.25)
    return check_probability(float(weight), "weight")


def purity(rho):
    rho = np.asarray(rho)
    return float(np.trace(rho @ rho).real)


def is_density_matrix(rho, dims=(2, 4)):
    try:
        check_density_matrix(rho, dims=dims)
    except ValueError:
        return False
    return True


def write_matrix_csv(matrix, path):
    """Write ``(row, col, re, im)`` rows in the fixed basis order.

    Values are formatted with 17 significant digits so a read back yields the
    identical doubles.
    """
    m = check_square(matrix, "matrix")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["row", "col", "re", "im"])
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                z = m[i, j]
                writer.writerow([i, j, f"{z.real:.17g}", f"{z.imag:.17g}"])
    return path


def read_matrix_csv(path):
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    dim = int(round(np.sqrt(len(rows))))
    if dim * dim != len(rows) or dim not in (2, 4):
        raise ValueError(f"{path}: expected 4 or 16 rows, found {len(rows)}")
    m = np.zeros((dim, dim), dtype=complex)
    for row in rows:
        m[int(row["row"]), int(row["col"])] = complex(float(row["re"]), float(row["im"]))
    return m
