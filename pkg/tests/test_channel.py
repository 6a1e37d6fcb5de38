import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heraldsim import channel, qstate
from heraldsim.channel import (
    ChannelParams, calibrated_noise_rate, capture_probability, equivalent_distance, fidelity_vs_noise,
    fixed_mode, gate_capture, gate_stream, herald_mode, sample_mixture_fidelity, signal_fraction,
    transmission,
)
from heraldsim.source import EmissionEvent, SourceParams, sample_events

SP = SourceParams()
# Oracle values: quadrature of the hypoexponential arrival density, the
# exponential delay CDF, and direct arithmetic for the noise calibration.
PEAK = 38.311921281739735
CAPTURE_FIXED = 0.9792514705463973
CAPTURE_HERALD = 0.7364028618842732
CALIBRATED_RATE = 2822798.8042272246


def test_transmission():
    assert transmission(ChannelParams()) == 1.0
    assert transmission(ChannelParams(attenuation=0.2, length=50)) == pytest.approx(0.1, abs=1e-15)
    values = [transmission(ChannelParams(length=x)) for x in (0, 10, 50, 200)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_gate_peak_and_capture():
    assert channel.qubit_time_peak(SP) == pytest.approx(PEAK, abs=1e-6)
    assert capture_probability(fixed_mode(400.0), SP) == pytest.approx(CAPTURE_FIXED, abs=1e-9)
    assert capture_probability(herald_mode(40.0), SP) == pytest.approx(CAPTURE_HERALD, abs=1e-12)
    assert capture_probability(herald_mode(40.0), SP) == pytest.approx(1 - np.exp(-4 / 3), abs=1e-12)


def test_capture_limits():
    assert capture_probability(fixed_mode(1e-6), SP) < 1e-7
    assert capture_probability(fixed_mode(1e6), SP) == pytest.approx(1.0, abs=1e-12)
    assert capture_probability(herald_mode(1e6), SP) == pytest.approx(1.0, abs=1e-12)


def test_gate_capture_matches_monte_carlo():
    events = sample_events(SP, 1_000_000, 8)
    heralded = events.herald_detected & events.qubit_detected
    for mode, expected in ((herald_mode(40.0), CAPTURE_HERALD), (fixed_mode(400.0), CAPTURE_FIXED)):
        in_gate, noise = gate_stream(events, mode, SP, 1)
        frac = in_gate[heralded].mean()
        n = heralded.sum()
        assert abs(frac - expected) <= 3 * np.sqrt(expected * (1 - expected) / n)


def test_gate_capture_single_event():
    e = EmissionEvent("heralded_pair", True, True, 10.0, 30.0)
    d = gate_capture(e, herald_mode(40.0, noise_rate=0.0), SP, 0)
    assert d.in_gate_signal and d.accepted and d.noise_counts == 0
    late = EmissionEvent("heralded_pair", True, True, 10.0, 80.0)
    assert not gate_capture(late, herald_mode(40.0, noise_rate=0.0), SP, 0).accepted
    huge = gate_capture(late, fixed_mode(1e9, noise_rate=0.0), SP, 0)
    assert huge.in_gate_signal
    with pytest.raises(ValueError):
        gate_capture(EmissionEvent("herald_only", True, False, 1.0, None), fixed_mode(), SP, 0)
    with pytest.raises(ValueError):
        gate_capture(EmissionEvent("qubit_only", False, True, None, 5.0), herald_mode(), SP, 0)


def test_noise_count_mean():
    params = fixed_mode(400.0, noise_rate=2.5e6)
    events = sample_events(SP, 100_000, 4)
    _, noise = gate_stream(events, params, SP, 5)
    lam = 2.5e6 * 400e-9
    assert abs(noise.mean() - lam) <= 3 * np.sqrt(lam / noise.size)


def test_signal_fraction():
    assert signal_fraction(0.5, fixed_mode(noise_rate=0.0)) == 1.0
    assert signal_fraction(0.0, fixed_mode(noise_rate=10.0)) == 0.0
    with pytest.raises(ValueError):
        signal_fraction(0.0, fixed_mode(noise_rate=0.0))
    s = 0.68 * CAPTURE_FIXED
    p = signal_fraction(s, fixed_mode(400.0, noise_rate=CALIBRATED_RATE))
    assert p == pytest.approx(0.3709677419354838, abs=1e-9)


@given(st.floats(1, 1e8), st.floats(1, 1e8), st.floats(0, 300))
def test_signal_fraction_monotone(r1, r2, length):
    lo, hi = sorted((r1, r2))
    p_lo = signal_fraction(0.5, fixed_mode(noise_rate=lo, length=length))
    p_hi = signal_fraction(0.5, fixed_mode(noise_rate=hi, length=length))
    assert p_hi <= p_lo
    assert signal_fraction(0.5, fixed_mode(noise_rate=lo, length=length + 10)) <= p_lo


def test_equivalent_distance():
    assert equivalent_distance(10.0) == 0.0
    assert equivalent_distance(100.0) == pytest.approx(50.0, abs=1e-12)
    assert equivalent_distance(CALIBRATED_RATE) == pytest.approx(272.5339962394788, abs=1e-6)
    assert equivalent_distance(1e4) < equivalent_distance(1e5)
    with pytest.raises(ValueError):
        equivalent_distance(100.0, ChannelParams(attenuation=0.0))


def test_calibration():
    assert calibrated_noise_rate(SP) == pytest.approx(CALIBRATED_RATE, rel=1e-9)
    recs = fidelity_vs_noise([0.0, CALIBRATED_RATE], SP)
    by = {(r["noise_rate_hz"], r["mode"]): r for r in recs}
    assert by[(0.0, "fixed")]["fidelity_analytic"] == pytest.approx(0.87, abs=1e-12)
    assert by[(0.0, "herald")]["fidelity_analytic"] == pytest.approx(0.87, abs=1e-12)
    assert by[(CALIBRATED_RATE, "fixed")]["fidelity_analytic"] == pytest.approx(0.48, abs=1e-9)
    assert by[(CALIBRATED_RATE, "herald")]["fidelity_analytic"] == pytest.approx(0.7559225996679535, abs=1e-9)


def test_noise_scan_limits_and_dominance():
    rates = np.logspace(0, 12, 25)
    recs = fidelity_vs_noise(rates, SP)
    fixed = [r for r in recs if r["mode"] == "fixed"]
    herald = [r for r in recs if r["mode"] == "herald"]
    assert all(h["fidelity_analytic"] > f["fidelity_analytic"] for f, h in zip(fixed, herald))
    assert all(h["p"] > f["p"] for f, h in zip(fixed, herald))
    assert fixed[-1]["fidelity_analytic"] == pytest.approx(0.25, abs=1e-3)
    assert herald[-1]["fidelity_analytic"] == pytest.approx(0.25, abs=1e-3)
    f = [r["fidelity_analytic"] for r in fixed]
    assert all(a >= b for a, b in zip(f, f[1:]))


def test_noise_scan_monte_carlo_agrees():
    rates = [0.0, 1e3, 1e5, 1e6, CALIBRATED_RATE, 1e7, 1e8]
    recs = fidelity_vs_noise(rates, SP, trials=100_000, random_state=list(range(2 * len(rates))))
    for r in recs:
        sigma = r["ci_high"] - r["fidelity_mc"]
        assert abs(r["fidelity_mc"] - r["fidelity_analytic"]) <= 3 * sigma
        assert r["ci_low"] <= r["fidelity_mc"] <= r["ci_high"]


def test_noise_scan_seed_list_is_order_independent():
    rates = [1e5, 1e6]
    seeds = [11, 12, 13, 14]
    full = fidelity_vs_noise(rates, SP, trials=2000, random_state=seeds)
    single = fidelity_vs_noise([1e6], SP, trials=2000, random_state=seeds[2:])
    assert full[2]["fidelity_mc"] == single[0]["fidelity_mc"]


@pytest.mark.parametrize("f0", [0.87, 1.0])
@pytest.mark.parametrize("p", [0.0, 0.25, 0.5, 0.75, 1.0])
def test_mixture_fidelity(p, f0):
    fid, se = sample_mixture_fidelity(p, f0, 100_000, random_state=int(100 * p + 1000 * f0))
    assert abs(fid - qstate.bell_fidelity_with_noise(p, f0)) <= 0.02
    assert abs(fid - qstate.bell_fidelity_with_noise(p, f0)) <= 4 * se


def test_params_validation():
    for bad in ({"attenuation": -1}, {"length": -1}, {"noise_rate": -1}, {"gate_width": 0}):
        with pytest.raises(ValueError):
            ChannelParams(**bad)
