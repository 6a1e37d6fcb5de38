"""Input validation helpers shared by the simulation modules.

These mirror the ``check_*`` helpers of scikit-learn: they take loosely typed
input, coerce it to a canonical numpy form and raise ``ValueError`` with a
readable message when an invariant does not hold.
"""

from __future__ import annotations

import numbers

import numpy as np

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
EIG_TOL = -1e-10
NORM_TOL = 1e-12


def check_probability(value, name="probability"):
    if not isinstance(value, numbers.Real) or np.isnan(value):
        raise ValueError(f"{name} must be a real number, got {value!r}")
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return float(value)


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or np.isnan(value):
        raise ValueError(f"{name} must be a real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value}")
    return float(value)


def check_square(matrix, name="matrix", dims=(2, 4)):
    """Coerce to a complex square array whose size is one of ``dims``."""
    m = np.asarray(matrix, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    if m.shape[0] not in dims:
        raise ValueError(f"{name} must have dimension in {dims}, got {m.shape[0]}")
    return m


def check_density_matrix(rho, name="rho", dims=(2, 4), tol=HERMITIAN_TOL):
    """Validate a density matrix and return it as a complex ndarray.

    Checks Hermiticity and unit trace (elementwise / absolute tolerance
    ``tol``) and positivity up to an eigenvalue floor of ``EIG_TOL``.
    """
    m = check_square(rho, name, dims)
    if not np.allclose(m, m.conj().T, rtol=0.0, atol=tol):
        raise ValueError(f"{name} is not Hermitian")
    tr = np.trace(m)
    if abs(tr - 1.0) > max(tol, TRACE_TOL):
        raise ValueError(f"{name} has trace {tr.real:.15g}, expected 1")
    evals = np.linalg.eigvalsh(m)
    if evals.min() < EIG_TOL:
        raise ValueError(f"{name} has negative eigenvalue {evals.min():.3g}")
    return m


def check_pure_state(psi, name="psi", dims=(2, 4)):
    v = np.asarray(psi, dtype=complex)
    if v.ndim != 1 or v.shape[0] not in dims:
        raise ValueError(f"{name} must be a vector of length in {dims}, got shape {v.shape}")
    norm = np.vdot(v, v).real
    if abs(norm - 1.0) > NORM_TOL:
        raise ValueError(f"{name} is not normalized (norm^2 = {norm:.15g})")
    return v


def check_axis(axis, name="axis"):
    a = np.asarray(axis, dtype=float)
    if a.shape != (3,):
        raise ValueError(f"{name} must be a 3-vector, got shape {a.shape}")
    n = np.linalg.norm(a)
    if abs(n - 1.0) > NORM_TOL:
        raise ValueError(f"{name} must be a unit vector, got |axis| = {n:.15g}")
    return a


def check_rng(random_state=None):
    """Return a ``numpy.random.Generator`` for ``None``, an int, a
    ``SeedSequence`` or an existing generator (passed through unchanged)."""
    return np.random.default_rng(random_state)
