"""Photonic channel, detector noise and temporal gating.

A gate of width ``t_g`` accepts qubit-photon clicks inside
``[center - t_g/2, center + t_g/2]``.  In fixed mode the center is measured
from the sequence trigger; in herald-referenced mode from the herald
detection time.  Detector noise is a Poisson process that lands anywhere in
the gate and yields a polarization-blind (white) photonic outcome.

Times are in ns, rates in Hz, lengths in km and attenuation in dB/km.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import qstate
from ._validation import check_positive, check_probability, check_rng
from .decoherence import FIDELITY_SETTINGS, fidelity_from_setting_counts
from .source import SourceParams

FIXED = "fixed"
HERALD = "herald"

# Noise rate used as the reference point of the equivalent-distance axis.
REFERENCE_NOISE_RATE = 10.0
# Gate widths compared in the noise scan.
FIXED_GATE_NS = 400.0
HERALD_GATE_NS = 40.0
# Ungated (400 ns) heralded fidelity at the calibrated noise level.
CALIBRATION_FIDELITY = 0.48


@dataclass(frozen=True)
class ChannelParams:
    attenuation: float = 0.2
    length: float = 0.0
    noise_rate: float = REFERENCE_NOISE_RATE
    gate_width: float = FIXED_GATE_NS
    herald_referenced: bool = False
    gate_offset: float | None = None

    def __post_init__(self):
        check_positive(self.attenuation, "attenuation", strict=False)
        check_positive(self.length, "length", strict=False)
        check_positive(self.noise_rate, "noise_rate", strict=False)
        check_positive(self.gate_width, "gate_width")

    @property
    def mode(self):
        return HERALD if self.herald_referenced else FIXED

    @property
    def expected_noise_counts(self):
        """Mean noise counts per gate, noise_rate * t_g."""
        return self.noise_rate * self.gate_width * 1e-9


@dataclass(frozen=True)
class GateDecision:
    accepted: bool
    in_gate_signal: bool
    noise_counts: int

    def __post_init__(self):
        if self.noise_counts < 0:
            raise ValueError("noise_counts must be non-negative")


def fixed_mode(gate_width=FIXED_GATE_NS, **kw):
    return ChannelParams(gate_width=gate_width, herald_referenced=False, **kw)


def herald_mode(gate_width=HERALD_GATE_NS, **kw):
    return ChannelParams(gate_width=gate_width, herald_referenced=True, **kw)


def transmission(params):
    return 10.0 ** (-params.attenuation * params.length / 10.0)


def qubit_time_peak(source):
    """Mode of the qubit-photon emission time t_herald + delay."""
    a, b = 1.0 / source.tau_h, (1.0 / source.tau_delta if source.tau_delta > 0 else np.inf)
    if np.isinf(b):
        return 0.0
    if np.isclose(a, b):
        return source.tau_h
    return float(np.log(b / a) / (b - a))


def default_gate_offset(params, source):
    """Fixed gates center on the peak of the qubit-time distribution; herald
    referenced gates open at the herald detection time."""
    if params.gate_offset is not None:
        return params.gate_offset
    if params.herald_referenced:
        return params.gate_width / 2
    return qubit_time_peak(source)


def _qubit_time_cdf(t, source):
    t = np.maximum(np.asarray(t, dtype=float), 0.0)
    a = 1.0 / source.tau_h
    if source.tau_delta <= 0:
        return 1.0 - np.exp(-a * t)
    b = 1.0 / source.tau_delta
    if np.isclose(a, b):
        return 1.0 - np.exp(-a * t) * (1 + a * t)
    return 1.0 - (b * np.exp(-a * t) - a * np.exp(-b * t)) / (b - a)


def _delay_cdf(t, source):
    t = np.maximum(np.asarray(t, dtype=float), 0.0)
    if source.tau_delta <= 0:
        return np.where(t >= 0, 1.0, 0.0)
    return 1.0 - np.exp(-t / source.tau_delta)


def capture_probability(params, source):
    """Probability that an emitted qubit photon falls inside the gate."""
    center = default_gate_offset(params, source)
    lo, hi = center - params.gate_width / 2, center + params.gate_width / 2
    cdf = _delay_cdf if params.herald_referenced else _qubit_time_cdf
    if params.herald_referenced and source.tau_delta <= 0:
        return float(lo <= 0 <= hi)
    return float(cdf(hi, source) - cdf(lo, source))


def gate_capture(event, params, source=SourceParams(), random_state=None):
    """Gate one emission event.

    The signal counts if the qubit photon lands in the gate; noise counts
    are Poisson.  At most one click is kept, a signal click taking priority.
    """
    if not event.qubit_detected:
        raise ValueError("event carries no qubit photon")
    if params.herald_referenced and not event.herald_detected:
        raise ValueError("herald-referenced gating needs a herald detection")
    rng = check_rng(random_state)
    center = default_gate_offset(params, source)
    if params.herald_referenced:
        center = center + event.t_herald
    in_gate = bool(abs(event.t_qubit - center) <= params.gate_width / 2)
    noise = int(rng.poisson(params.expected_noise_counts))
    return GateDecision(accepted=in_gate or noise > 0, in_gate_signal=in_gate, noise_counts=noise)


def gate_stream(events, params, source=SourceParams(), random_state=None):
    """Vectorized :func:`gate_capture` over an :class:`~heraldsim.source.EventStream`.

    Events without a qubit photon (or without a herald in herald-referenced
    mode) have ``in_gate`` False.  Returns ``(in_gate, noise_counts)`` arrays.
    """
    rng = check_rng(random_state)
    center = default_gate_offset(params, source)
    if params.herald_referenced:
        center = center + events.t_herald
    with np.errstate(invalid="ignore"):
        in_gate = np.abs(events.t_qubit - center) <= params.gate_width / 2
    in_gate &= events.qubit_detected
    if params.herald_referenced:
        in_gate &= events.herald_detected
    noise = rng.poisson(params.expected_noise_counts, size=len(events))
    return in_gate, noise


def signal_fraction(signal_per_event, params):
    """Fraction of gated clicks that come from the qubit photon.

    Expected signal clicks per heralded attempt are ``signal_per_event``
    times the fiber transmission; expected noise clicks are the noise rate
    times the gate width.
    """
    signal_per_event = check_probability(signal_per_event, "signal_per_event")
    signal = signal_per_event * transmission(params)
    noise = params.expected_noise_counts
    if signal + noise == 0:
        raise ValueError("no signal and no noise: signal fraction undefined")
    return signal / (signal + noise)


def equivalent_distance(noise_rate, reference=ChannelParams()):
    """Fiber length with the same signal-to-noise ratio at the reference
    noise rate as a local measurement at ``noise_rate``."""
    noise_rate = check_positive(noise_rate, "noise_rate")
    ref = check_positive(reference.noise_rate, "reference noise_rate")
    if reference.attenuation == 0:
        raise ValueError("equivalent distance needs a lossy reference channel")
    return max(0.0, 10.0 / reference.attenuation * np.log10(noise_rate / ref))


def heralded_signal(params, source):
    """Expected gated signal clicks per heralded attempt, before fiber loss."""
    return source.eta_q_given_h * capture_probability(params, source)


def calibrated_noise_rate(source=SourceParams(), fidelity=CALIBRATION_FIDELITY, gate=None):
    """Noise rate at which the fixed-gate heralded fidelity drops to ``fidelity``.

    The signal weight that yields ``fidelity`` fixes the noise-to-signal
    ratio ``(1 - weight) / weight`` (1.695 for 0.48 with f0 = 0.87).
    """
    gate = fixed_mode() if gate is None else gate
    weight = qstate.white_noise_weight(fidelity, source.f_heralded)
    ratio = (1 - weight) / weight
    signal = heralded_signal(gate, source) * transmission(gate)
    return ratio * signal / (gate.gate_width * 1e-9)


def _noise_mc(source, params, trials, rng):
    """Detector-level Monte Carlo for one scan point.

    Every click in every gate is a measurement record: gated signal photons
    are measured on the heralded state, noise clicks on the atom's reduced
    state paired with a random polarization.  Returns the fidelity estimate,
    its standard error and the empirical signal fraction.
    """
    stream_t_h = rng.exponential(source.tau_h, trials)
    delay = rng.exponential(source.tau_delta, trials) if source.tau_delta > 0 else np.zeros(trials)
    present = rng.random(trials) < source.eta_q_given_h * transmission(params)
    center = default_gate_offset(params, source)
    t_q = stream_t_h + delay
    ref = center + stream_t_h if params.herald_referenced else center
    signal = present & (np.abs(t_q - ref) <= params.gate_width / 2)
    noise = rng.poisson(params.expected_noise_counts, trials)
    n_signal, n_noise = int(signal.sum()), int(noise.sum())
    if n_signal + n_noise == 0:
        return np.nan, np.nan, np.nan

    rho_signal = qstate.werner(qstate.white_noise_weight(source.f_heralded))
    rho_noise = np.kron(qstate.IDENTITY_2 / 2, qstate.partial_trace(rho_signal, qstate.ATOM))
    counts = np.zeros((3, 4), dtype=np.int64)
    # Settings are assigned round-robin over clicks.
    for k, (pa, aa, _) in enumerate(FIDELITY_SETTINGS):
        ns = n_signal // 3 + (k < n_signal % 3)
        nn = n_noise // 3 + (k < n_noise % 3)
        counts[k] += rng.multinomial(ns, qstate.measure_prob(rho_signal, pa, aa))
        counts[k] += rng.multinomial(nn, qstate.measure_prob(rho_noise, pa, aa))
    if (counts.sum(axis=1) == 0).any():
        return np.nan, np.nan, n_signal / (n_signal + n_noise)
    fid, se = fidelity_from_setting_counts(counts)
    return fid, se, n_signal / (n_signal + n_noise)


def fidelity_vs_noise(noise_rates, source=SourceParams(), modes=None, trials=None,
                      random_state=None, reference=ChannelParams()):
    """Heralded Bell fidelity against detector noise rate for each gating mode.

    ``modes`` defaults to a fixed 400 ns gate and a herald-referenced 40 ns
    gate.  The analytic curve applies :func:`~heraldsim.qstate.bell_fidelity_with_noise`
    to the weight from :func:`signal_fraction`; with ``trials`` set, each point is also
    simulated with ``trials`` heralded attempts.  ``random_state`` may be a
    sequence of seeds, one per (noise rate, mode) point in row-major order.
    """
    modes = [fixed_mode(), herald_mode()] if modes is None else list(modes)
    seeds = None
    if trials and isinstance(random_state, (list, tuple)):
        seeds = list(random_state)
    elif trials:
        rng = check_rng(random_state)
    records = []
    k = 0
    for rate in noise_rates:
        eq_km = equivalent_distance(rate, reference) if rate > 0 else 0.0
        for mode in modes:
            params = replace(mode, noise_rate=float(rate))
            frac = signal_fraction(heralded_signal(params, source), params)
            rec = {
                "noise_rate_hz": float(rate),
                "equivalent_km": float(eq_km),
                "mode": params.mode,
                "gate_ns": params.gate_width,
                "p": frac,
                "fidelity_analytic": qstate.bell_fidelity_with_noise(frac, source.f_heralded),
            }
            if trials:
                point_rng = check_rng(seeds[k]) if seeds is not None else rng
                fid, se, p_mc = _noise_mc(source, params, trials, point_rng)
                rec.update(fidelity_mc=fid, ci_low=fid - se, ci_high=fid + se, p_mc=p_mc)
            records.append(rec)
            k += 1
    return records


def sample_mixture_fidelity(weight, f0, trials, random_state=None):
    """Monte Carlo Bell fidelity of measurements mixed with white noise.

    Each of ``trials`` measurement records comes from the state of fidelity
    ``f0`` with probability ``weight`` and otherwise from its atomic marginal
    paired with a random polarization.  Settings rotate through XX, YY, ZZ.
    Returns ``(fidelity, standard_error)``.
    """
    check_probability(weight, "weight")
    rng = check_rng(random_state)
    rho0 = qstate.werner(qstate.white_noise_weight(f0))
    rho_noise = np.kron(qstate.IDENTITY_2 / 2, qstate.partial_trace(rho0, qstate.ATOM))
    signal = rng.random(trials) < weight
    setting = np.arange(trials) % 3
    counts = np.zeros((3, 4), dtype=np.int64)
    for k, (pa, aa, _) in enumerate(FIDELITY_SETTINGS):
        here = setting == k
        n_sig = int((signal & here).sum())
        counts[k] += rng.multinomial(n_sig, qstate.measure_prob(rho0, pa, aa))
        counts[k] += rng.multinomial(int(here.sum()) - n_sig, qstate.measure_prob(rho_noise, pa, aa))
    return fidelity_from_setting_counts(counts)
