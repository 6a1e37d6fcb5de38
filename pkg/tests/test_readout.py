import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from heraldsim import qstate, readout
from heraldsim.scenarios import familywise_z
from heraldsim.readout import (
    BASIS_ROTATION, F1, F2, PI_TRANSFER, RabiParams, ReadoutParams, ThresholdDiscriminator,
    atom_measurement, atom_up_probability, discriminate, fluorescence_counts, misread_probabilities,
    mw_rotation, optimal_threshold, rabi_population, readout_fidelity, readout_fidelity_vs_duration,
)

from conftest import axes, densities, random_axis, random_density

# Explicit-parameter model with a fixed 2-count threshold and 0.2 dark counts.
FIXED_THRESHOLD = ReadoutParams(dark_mean_at_ref=0.2, threshold=2)


def pois_sf(k, lam):
    return 1 - sum(math.exp(-lam) * lam**j / math.factorial(j) for j in range(k))


def pois_cdf(k, lam):
    return sum(math.exp(-lam) * lam**j / math.factorial(j) for j in range(k + 1))


class TestRabi:
    def test_population_examples(self):
        p = RabiParams(contrast=0.95)
        assert rabi_population(0.0, p) == 0.0
        assert rabi_population(np.pi / p.omega, p) == pytest.approx(0.95, abs=1e-12)
        assert rabi_population(np.pi / (2 * p.omega), p) == pytest.approx(0.475, abs=1e-12)
        assert rabi_population(BASIS_ROTATION.pi_time / 2, BASIS_ROTATION) == pytest.approx(0.48, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            RabiParams(omega=0)
        with pytest.raises(ValueError):
            RabiParams(contrast=1.5)
        with pytest.raises(ValueError):
            RabiParams(transition="up_down")
        with pytest.raises(ValueError):
            rabi_population(-1.0, PI_TRANSFER)


class TestRotation:
    def test_identity(self, rng):
        rho = random_density(rng)
        np.testing.assert_allclose(mw_rotation(rho, 0.0, 0.3, 0.0), rho, atol=1e-15)

    def test_pi_transfer_with_error(self):
        up = qstate.density_of(qstate.KET_UP)
        out = mw_rotation(up, np.pi, 0.0, 0.05)
        # 0.95 * 1 + 0.05 * 1/2
        assert out[1, 1].real == pytest.approx(0.975, abs=1e-12)

    def test_full_error(self, rng):
        rho = random_density(rng)
        out = mw_rotation(rho, 1.1, 0.4, 1.0)
        np.testing.assert_allclose(qstate.partial_trace(out, qstate.ATOM), np.eye(2) / 2, atol=1e-12)
        np.testing.assert_allclose(out, np.kron(qstate.partial_trace(rho, qstate.PHOTON), np.eye(2) / 2),
                                   atol=1e-12)

    @given(densities(), st.floats(0, 2 * np.pi), st.floats(-np.pi, np.pi))
    def test_error_free_rotation_is_unitary(self, rho, theta, phi):
        out = mw_rotation(rho, theta, phi, 0.0)
        assert abs(qstate.purity(out) - qstate.purity(rho)) <= 1e-12
        assert qstate.is_density_matrix(out)

    @given(axes())
    def test_basis_rotation_maps_axis_to_z(self, axis):
        theta, phi = readout.basis_rotation_angles(axis)
        u = readout.rotation_unitary(theta, phi)
        rotated = u @ qstate.projector(axis, +1) @ u.conj().T
        np.testing.assert_allclose(rotated, qstate.projector("z", +1), atol=1e-9)


class TestFluorescence:
    def test_means(self):
        p = ReadoutParams()
        bright = fluorescence_counts(F2, p, 1, size=100_000)
        dark = fluorescence_counts(F1, p, 2, size=100_000)
        assert abs(bright.mean() - 20) <= 3 * np.sqrt(20 / 1e5)
        lam_d = readout.DARK_MEAN_AT_REF
        assert abs(dark.mean() - lam_d) <= 3 * np.sqrt(lam_d / 1e5)
        assert fluorescence_counts(F2, ReadoutParams(duration=1e-12), 3, size=1000).sum() == 0
        dark02 = fluorescence_counts(F1, FIXED_THRESHOLD, 4, size=100_000)
        assert abs(dark02.mean() - 0.2) <= 3 * np.sqrt(0.2 / 1e5)

    def test_heating_hook(self):
        assert ReadoutParams().mean_counts(F2) == pytest.approx(20.0, abs=1e-12)
        hot = ReadoutParams(heating_time=10.0)
        assert hot.mean_counts(F2) == pytest.approx(20 / 7.5 * 10 * (1 - np.exp(-0.75)), abs=1e-12)

    def test_discriminate(self):
        assert discriminate(0) == F1
        assert discriminate(20, FIXED_THRESHOLD) == F2
        assert discriminate(1, FIXED_THRESHOLD) == F1
        assert list(discriminate(np.array([0, 2, 5]), FIXED_THRESHOLD)) == [F1, F2, F2]

    def test_params_validation(self):
        for bad in ({"threshold": 0}, {"threshold": 1.5}, {"duration": 0}, {"bright_rate": -1}):
            with pytest.raises(ValueError):
                ReadoutParams(**bad)
        with pytest.raises(ValueError):
            ReadoutParams().mean_counts("F3")


class TestMisreads:
    def test_fixed_threshold_model(self):
        e_dark, e_bright = misread_probabilities(FIXED_THRESHOLD)
        assert e_dark == pytest.approx(0.017523096306421793, abs=1e-12)
        assert e_bright == pytest.approx(4.3284226071209714e-08, abs=1e-15)
        assert readout_fidelity(FIXED_THRESHOLD) == pytest.approx(0.9912384302046761, abs=1e-12)
        three = readout_fidelity(ReadoutParams(dark_mean_at_ref=0.2, threshold=2, duration=3.0))
        assert three == pytest.approx(0.9969732452232221, abs=1e-12)

    def test_defaults(self):
        assert optimal_threshold() == 11
        e_dark, e_bright = misread_probabilities()
        assert e_dark == pytest.approx(0.009188281173347135, abs=1e-12)
        assert e_bright == pytest.approx(0.010811718826652723, abs=1e-12)
        assert readout_fidelity() == pytest.approx(0.990, abs=1e-12)

    def test_calibration_reproduces_dark_mean(self):
        assert readout.calibrate_dark_mean(0.990) == pytest.approx(readout.DARK_MEAN_AT_REF, abs=1e-9)

    @given(st.floats(0.01, 60), st.floats(0.001, 30))
    def test_closed_form_threshold_is_optimal(self, lam_b, lam_d):
        params = ReadoutParams(bright_rate=lam_b / 7.5, dark_mean_at_ref=lam_d)
        lam_b, lam_d = params.mean_counts(F2), params.mean_counts(F1)
        if lam_b <= lam_d:
            with pytest.raises(ValueError):
                optimal_threshold(params)
            return
        fid = lambda k: 1 - 0.5 * (pois_sf(k, lam_d) + pois_cdf(k - 1, lam_b))
        best = max(fid(k) for k in range(1, 120))
        assert fid(optimal_threshold(params)) >= best - 1e-12

    def test_duration_curve(self):
        durations = [0.5, 3.0, 7.5, 15.0]
        curve = readout_fidelity_vs_duration(durations)
        oracle = [0.7334001080287469, 0.9287471970455687, 0.99, 0.9994706118853529]
        np.testing.assert_allclose(curve, oracle, atol=1e-12)
        fine = readout_fidelity_vs_duration(np.linspace(0.05, 60, 400))
        assert np.all(np.diff(fine) > 0)
        assert fine[-1] > 1 - 1e-9
        assert readout_fidelity(ReadoutParams(duration=1e-9)) == pytest.approx(0.5, abs=1e-6)
        with pytest.raises(ValueError):
            readout_fidelity_vs_duration([0.0])

    @pytest.mark.parametrize("params", [ReadoutParams(), FIXED_THRESHOLD])
    def test_sampled_misreads_match_tails(self, params):
        n = 100_000
        e_dark, e_bright = misread_probabilities(params)
        dark = discriminate(fluorescence_counts(F1, params, 5, size=n), params)
        bright = discriminate(fluorescence_counts(F2, params, 6, size=n), params)
        for got, p in (((dark == F2).mean(), e_dark), ((bright == F1).mean(), e_bright)):
            assert abs(got - p) <= 3 * np.sqrt(p * (1 - p) / n) + 1 / n

    def test_histogram(self):
        counts, fb, fd = readout.count_histogram(ReadoutParams(), 100_000, 7)
        assert fb.sum() == pytest.approx(1.0) and fd.sum() == pytest.approx(1.0)
        assert abs(np.dot(counts, fb) - 20) <= 0.5


def chain_up_probability(rho_a, axis, e_transfer, e_rot, e_dark, e_bright):
    """Step-by-step oracle: rotate (with depolarizing error), transfer, read."""
    theta = math.acos(max(-1.0, min(1.0, axis[2])))
    azimuth = math.atan2(axis[1], axis[0]) if theta > 1e-15 else 0.0
    phi = azimuth - math.pi / 2
    gen = math.cos(phi) * qstate.SIGMA_X + math.sin(phi) * qstate.SIGMA_Y
    u = expm(-0.5j * theta * gen)
    rho = u @ rho_a @ u.conj().T
    if theta > 1e-15:
        rho = (1 - e_rot) * rho + e_rot * np.eye(2) / 2
    rho = (1 - e_transfer) * rho + e_transfer * np.eye(2) / 2
    p_up = rho[0, 0].real
    return p_up * (1 - e_dark) + (1 - p_up) * e_bright


class TestAtomMeasurement:
    def test_ideal_chain(self):
        perfect = ReadoutParams(dark_mean_at_ref=0.0, bright_rate=1e3)
        ideal = (RabiParams(contrast=1.0), RabiParams(contrast=1.0, transition="i_down"))
        up = qstate.density_of(qstate.KET_UP)
        outcomes = atom_measurement(up, qstate.PAULI_AXES["z"], ideal, perfect, 0, size=1000)
        assert np.all(outcomes == readout.UP)

    def test_default_chain_examples(self):
        up = qstate.density_of(qstate.KET_UP)
        assert atom_up_probability(up, qstate.PAULI_AXES["z"]) == pytest.approx(0.9663117188266528, abs=1e-12)
        plus = qstate.density_of(np.array([1, 1]) / np.sqrt(2))
        assert atom_up_probability(plus, qstate.PAULI_AXES["x"]) == pytest.approx(0.9476917188266528, abs=1e-12)
        rng = np.random.default_rng(3)
        out = atom_measurement(np.eye(2) / 2, random_axis(rng), random_state=rng, size=100_000)
        assert abs((out == readout.UP).mean() - 0.5) <= 3 * np.sqrt(0.25 / 1e5)

    def test_povm_matches_stepwise_chain(self, rng):
        e_dark, e_bright = misread_probabilities()
        for _ in range(20):
            rho = random_density(rng, 2)
            axis = random_axis(rng)
            expected = chain_up_probability(rho, axis, 0.05, 0.04, e_dark, e_bright)
            assert abs(atom_up_probability(rho, axis) - expected) <= 1e-12

    def test_sampled_outcomes_match_chain(self, rng):
        e_dark, e_bright = misread_probabilities()
        n = 100_000
        z = familywise_z(20)
        for _ in range(20):
            rho = random_density(rng)
            axis = random_axis(rng)
            p = chain_up_probability(qstate.partial_trace(rho, qstate.ATOM), axis, 0.05, 0.04, e_dark, e_bright)
            got = (atom_measurement(rho, axis, random_state=rng, size=n) == readout.UP).mean()
            assert abs(got - p) <= z * np.sqrt(p * (1 - p) / n)
        assert atom_measurement(rho, axis, random_state=1) in (readout.UP, readout.DOWN)

    def test_detection_share_divided_out(self):
        full = readout.mw_error_rates()
        split = readout.mw_error_rates(attribute_full_error=False)
        assert full == pytest.approx((0.05, 0.04), abs=1e-12)
        assert split[0] == pytest.approx(1 - 0.95 / 0.99, abs=1e-12)
        assert split[1] == pytest.approx(1 - 0.96 / 0.99, abs=1e-12)


class TestThresholdDiscriminator:
    def test_learns_optimal_threshold(self):
        p = ReadoutParams()
        counts = np.concatenate([fluorescence_counts(F1, p, 1, size=50_000), fluorescence_counts(F2, p, 2, size=50_000)])
        labels = np.array([F1] * 50_000 + [F2] * 50_000)
        clf = ThresholdDiscriminator().fit(counts, labels)
        assert clf.threshold_ in (10, 11, 12)
        assert clf.score(counts, labels) == pytest.approx(0.99, abs=0.003)
        assert list(clf.predict([0, 30])) == [F1, F2]

    def test_needs_both_classes(self):
        with pytest.raises(ValueError):
            ThresholdDiscriminator().fit([1, 2, 3], [F1, F1, F1])
        with pytest.raises(ValueError):
            ThresholdDiscriminator().fit([1, 2], ["a", "b"])
