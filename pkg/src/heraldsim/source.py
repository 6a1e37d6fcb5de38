"""Monte Carlo model of the heralded atom-photon entanglement source.

Every excitation attempt ends in one of four branches:

==============  =====================================  =======================
branch          probability                            photons in fiber
==============  =====================================  =======================
heralded_pair   eta_h * eta_q|h                        herald + qubit
herald_only     eta_h * (1 - eta_q|h)                  herald
qubit_only      eta_q - eta_h * eta_q|h                qubit
none            remainder                              --
==============  =====================================  =======================

Branches carrying a qubit photon come with a Werner-form atom-photon state.
The unheralded fidelity is fixed by requiring that the probability-weighted
mixture over all qubit events reproduces ``f_all``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from statsmodels.stats.proportion import proportion_confint

from . import qstate
from ._validation import check_positive, check_probability, check_rng

HERALDED_PAIR = "heralded_pair"
QUBIT_ONLY = "qubit_only"
HERALD_ONLY = "herald_only"
NONE = "none"
BRANCHES = (HERALDED_PAIR, QUBIT_ONLY, HERALD_ONLY, NONE)
_HAS_HERALD = np.array([True, False, True, False])
_HAS_QUBIT = np.array([True, True, False, False])

# 1-sigma style intervals, as quoted in the efficiency bar chart.
CI_LEVEL = 0.6827


@dataclass(frozen=True)
class SourceParams:
    """Effective, calibrated source parameters (in-fiber efficiencies).

    Times are in nanoseconds.  ``tau_h`` and ``tau_delta`` set the herald
    wavepacket decay and the herald-to-qubit emission delay.
    """

    eta_q: float = 0.43
    eta_h: float = 0.34
    eta_q_given_h: float = 0.68
    f_heralded: float = 0.87
    f_all: float = 0.65
    f_nonresonant: float = 0.29
    tau_h: float = 50.0
    tau_delta: float = 30.0

    def __post_init__(self):
        for name in ("eta_q", "eta_h", "eta_q_given_h"):
            check_probability(getattr(self, name), name)
        for name in ("f_heralded", "f_all", "f_nonresonant"):
            f = getattr(self, name)
            if not 0.25 <= f <= 1.0:
                raise ValueError(f"{name} must lie in [0.25, 1], got {f}")
        check_positive(self.tau_h, "tau_h")
        check_positive(self.tau_delta, "tau_delta", strict=False)
        if self.eta_h * self.eta_q_given_h > self.eta_q + 1e-15:
            raise ValueError(
                "inconsistent efficiencies: eta_h * eta_q_given_h "
                f"= {self.eta_h * self.eta_q_given_h:.6g} exceeds eta_q = {self.eta_q}"
            )
        either = self.eta_q + self.eta_h - self.eta_h * self.eta_q_given_h
        if either > 1 + 1e-15:
            raise ValueError(f"inconsistent efficiencies: P(herald or qubit) = {either:.6g} exceeds 1")

    @property
    def heralding_gain(self):
        return self.eta_q_given_h / self.eta_q


def branch_probabilities(params):
    """Probabilities of (heralded_pair, qubit_only, herald_only, none)."""
    pair = params.eta_h * params.eta_q_given_h
    qubit_only = params.eta_q - pair
    if qubit_only < 0:
        raise ValueError("qubit_only probability is negative; check eta values")
    herald_only = params.eta_h * (1.0 - params.eta_q_given_h)
    none = 1.0 - pair - qubit_only - herald_only
    if none < -1e-12:
        raise ValueError("branch probabilities exceed one; check eta values")
    return np.array([pair, qubit_only, herald_only, max(none, 0.0)])


def unheralded_fidelity(params):
    """Bell fidelity of the qubit_only branch implied by ``f_all``."""
    pair, qubit_only, _, _ = branch_probabilities(params)
    if qubit_only <= 0:
        raise ValueError("no qubit_only events: unheralded fidelity is undefined")
    f_u = (params.eta_q * params.f_all - pair * params.f_heralded) / qubit_only
    if not 0.25 - 1e-12 <= f_u <= 1.0 + 1e-12:
        raise ValueError(
            f"unheralded fidelity {f_u:.4f} lies outside [0.25, 1]; "
            "f_all and f_heralded are inconsistent with the efficiencies"
        )
    return float(min(max(f_u, 0.25), 1.0))


def branch_state(branch, params):
    """Werner-form atom-photon state emitted on a qubit-carrying branch."""
    if branch == HERALDED_PAIR:
        f = params.f_heralded
    elif branch == QUBIT_ONLY:
        f = unheralded_fidelity(params)
    else:
        raise ValueError(f"branch {branch!r} carries no qubit photon")
    return qstate.werner(qstate.white_noise_weight(f))


def sample_emission_times(params, random_state=None, size=None):
    """Draw (t_herald, t_qubit) in ns.

    The herald leaves first, ``t_herald ~ Exp(tau_h)``; the qubit photon
    follows after an independent ``Exp(tau_delta)`` delay.  With ``size``
    set, arrays of that length are returned.
    """
    rng = check_rng(random_state)
    t_h = rng.exponential(params.tau_h, size=size)
    delay = rng.exponential(params.tau_delta, size=size) if params.tau_delta > 0 else 0.0 * t_h
    return t_h, t_h + delay


@dataclass(frozen=True)
class EmissionEvent:
    branch: str
    herald_detected: bool
    qubit_detected: bool
    t_herald: float | None
    t_qubit: float | None

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise ValueError(f"unknown branch {self.branch!r}")
        idx = BRANCHES.index(self.branch)
        if self.herald_detected != _HAS_HERALD[idx] or self.qubit_detected != _HAS_QUBIT[idx]:
            raise ValueError(f"flags inconsistent with branch {self.branch!r}")
        if (self.t_herald is not None) != self.herald_detected:
            raise ValueError("t_herald must be present iff the herald was detected")
        if (self.t_qubit is not None) != self.qubit_detected:
            raise ValueError("t_qubit must be present iff the qubit photon was detected")


@dataclass
class EventStream:
    """Column-oriented batch of emission events.

    ``branch`` holds indices into :data:`BRANCHES`; absent photons have NaN
    timestamps.  Emission times are drawn for every attempt (so a batch can
    be re-gated without resampling) and masked afterwards.
    """

    branch: np.ndarray
    t_herald: np.ndarray
    t_qubit: np.ndarray

    def __len__(self):
        return len(self.branch)

    @property
    def herald_detected(self):
        return _HAS_HERALD[self.branch]

    @property
    def qubit_detected(self):
        return _HAS_QUBIT[self.branch]

    def __iter__(self):
        for b, th, tq in zip(self.branch, self.t_herald, self.t_qubit):
            yield EmissionEvent(
                branch=BRANCHES[b],
                herald_detected=bool(_HAS_HERALD[b]),
                qubit_detected=bool(_HAS_QUBIT[b]),
                t_herald=None if np.isnan(th) else float(th),
                t_qubit=None if np.isnan(tq) else float(tq),
            )

    @classmethod
    def from_events(cls, events):
        events = list(events)
        nan = float("nan")
        return cls(
            branch=np.array([BRANCHES.index(e.branch) for e in events], dtype=int),
            t_herald=np.array([nan if e.t_herald is None else e.t_herald for e in events]),
            t_qubit=np.array([nan if e.t_qubit is None else e.t_qubit for e in events]),
        )

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["attempt_id", "branch", "herald_detected", "qubit_detected", "t_herald_ns", "t_qubit_ns"]
            )
            for i, (b, th, tq) in enumerate(zip(self.branch, self.t_herald, self.t_qubit)):
                writer.writerow([
                    i,
                    BRANCHES[b],
                    int(_HAS_HERALD[b]),
                    int(_HAS_QUBIT[b]),
                    "" if np.isnan(th) else f"{th:.17g}",
                    "" if np.isnan(tq) else f"{tq:.17g}",
                ])
        return path

    @classmethod
    def from_csv(cls, path):
        with Path(path).open(newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls(
            branch=np.array([BRANCHES.index(r["branch"]) for r in rows], dtype=int),
            t_herald=np.array([float(r["t_herald_ns"]) if r["t_herald_ns"] else np.nan for r in rows]),
            t_qubit=np.array([float(r["t_qubit_ns"]) if r["t_qubit_ns"] else np.nan for r in rows]),
        )


def sample_events(params, n_attempts, random_state=None):
    """Simulate ``n_attempts`` source attempts as an :class:`EventStream`."""
    rng = check_rng(random_state)
    cdf = np.cumsum(branch_probabilities(params))
    branch = np.searchsorted(cdf, rng.random(n_attempts), side="right")
    branch = np.minimum(branch, len(BRANCHES) - 1)
    t_h, t_q = sample_emission_times(params, rng, size=n_attempts)
    t_h = np.where(_HAS_HERALD[branch], t_h, np.nan)
    t_q = np.where(_HAS_QUBIT[branch], t_q, np.nan)
    return EventStream(branch=branch, t_herald=t_h, t_qubit=t_q)


def sample_attempt(params, random_state=None):
    """Simulate one attempt and return it as an :class:`EmissionEvent`."""
    return next(iter(sample_events(params, 1, random_state)))


@dataclass(frozen=True)
class EfficiencyEstimate:
    value: float
    ci_low: float
    ci_high: float


def _wilson(k, n):
    lo, hi = proportion_confint(k, n, alpha=1 - CI_LEVEL, method="wilson")
    return EfficiencyEstimate(k / n, float(lo), float(hi))


def estimate_efficiencies(events):
    """Empirical (eta_q, eta_h, eta_q|h) with Wilson intervals.

    ``events`` is an :class:`EventStream` or any iterable of
    :class:`EmissionEvent`.
    """
    if not isinstance(events, EventStream):
        events = EventStream.from_events(events)
    n = len(events)
    if n == 0:
        raise ValueError("cannot estimate efficiencies from an empty event list")
    heralds = int(events.herald_detected.sum())
    if heralds == 0:
        raise ValueError("no herald detections: eta_q|h is undefined")
    qubits = int(events.qubit_detected.sum())
    pairs = int((events.branch == BRANCHES.index(HERALDED_PAIR)).sum())
    return _wilson(qubits, n), _wilson(heralds, n), _wilson(pairs, heralds)
