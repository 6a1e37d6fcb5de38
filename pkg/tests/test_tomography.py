import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from heraldsim import qstate, tomography
from heraldsim.tomography import (
    PAULI_PAIRS, CountsTable, LinearInversionTomography, TomographySettings, fidelity_with_bell,
    invert_probabilities, linear_inversion, project_physical, setting_probabilities, simulate_counts,
    trace_distance,
)

from conftest import densities, random_density

PSI = qstate.bell_state_psi()
BELL = qstate.density_of(PSI)
P87 = 0.62 / 0.75


def exact_counts(rho, scale=10**12):
    """Counts proportional to the true distribution (frequency error < 1e-12)."""
    probs = setting_probabilities(rho)
    return CountsTable(PAULI_PAIRS, np.rint(probs * scale).astype(np.int64))


class TestSimulateCounts:
    def test_totals_and_shape(self):
        c = simulate_counts(BELL, TomographySettings(500), random_state=1)
        assert c.counts.shape == (9, 4)
        assert np.all(c.shots == 500)

    def test_bell_zz_support(self):
        c = simulate_counts(BELL, TomographySettings(10_000), random_state=2)
        zz = c.counts[PAULI_PAIRS.index(("z", "z"))]
        assert zz[0] == 0 and zz[3] == 0 and zz[1] + zz[2] == 10_000

    def test_frequencies_converge(self, rng):
        rho = random_density(rng)
        c = simulate_counts(rho, TomographySettings(100_000), random_state=rng)
        probs = setting_probabilities(rho)
        sigma = np.sqrt(probs * (1 - probs) / 1e5)
        assert np.all(np.abs(c.frequencies() - probs) <= 3 * sigma + 1e-12)

    def test_full_chain_mixes_outcomes(self):
        p_ideal = setting_probabilities(BELL)
        p_full = setting_probabilities(BELL, chain=tomography.FULL_READOUT)
        assert np.allclose(p_full.sum(axis=1), 1)
        zz = PAULI_PAIRS.index(("z", "z"))
        assert p_ideal[zz, 0] == pytest.approx(0, abs=1e-15)
        assert p_full[zz, 0] > 0.01
        with pytest.raises(ValueError):
            setting_probabilities(BELL, chain="noisy")

    def test_settings_validation(self):
        with pytest.raises(ValueError):
            TomographySettings(0)
        with pytest.raises(ValueError):
            TomographySettings(10, bases=())

    def test_counts_validation(self):
        with pytest.raises(ValueError):
            CountsTable(PAULI_PAIRS, np.zeros((9, 3)))
        with pytest.raises(ValueError):
            CountsTable(PAULI_PAIRS, -np.ones((9, 4)))

    def test_csv_round_trip(self, tmp_path):
        c = simulate_counts(qstate.werner(0.5), TomographySettings(100), random_state=3)
        path = c.to_csv(tmp_path / "counts.csv")
        assert path.read_text().splitlines()[0] == "photon_axis,atom_axis,outcome_p,outcome_a,count"
        back = CountsTable.from_csv(path)
        assert back.bases == c.bases
        assert np.array_equal(back.counts, c.counts)


class TestInversion:
    def test_exact_examples(self):
        assert np.max(np.abs(invert_probabilities(setting_probabilities(BELL)) - BELL)) <= 1e-12
        mixed = np.eye(4) / 4
        assert np.max(np.abs(invert_probabilities(setting_probabilities(mixed)) - mixed)) <= 1e-12

    @given(densities())
    def test_round_trip(self, rho):
        assert np.max(np.abs(invert_probabilities(setting_probabilities(rho)) - rho)) <= 1e-12

    def test_round_trip_through_counts(self, rng):
        rho = random_density(rng)
        assert np.max(np.abs(linear_inversion(exact_counts(rho)) - rho)) <= 1e-11

    def test_finite_shots_can_be_unphysical(self):
        found = False
        for seed in range(20):
            m = linear_inversion(simulate_counts(BELL, TomographySettings(200), random_state=seed))
            assert abs(np.trace(m) - 1) <= 1e-12
            assert np.max(np.abs(m - m.conj().T)) <= 1e-12
            found |= np.linalg.eigvalsh(m).min() < -1e-6
        assert found

    def test_requires_all_settings(self):
        c = CountsTable(PAULI_PAIRS[:8], np.ones((8, 4), dtype=int))
        with pytest.raises(ValueError, match="missing"):
            linear_inversion(c)

    def test_unequal_shot_totals(self, rng):
        rho = random_density(rng)
        probs = setting_probabilities(rho)
        shots = np.arange(1, 10)[:, None] * 10**11
        c = CountsTable(PAULI_PAIRS, np.rint(probs * shots).astype(np.int64))
        assert np.max(np.abs(linear_inversion(c) - rho)) <= 1e-10


class TestProjection:
    def test_physical_unchanged(self, rng):
        rho = random_density(rng)
        assert np.max(np.abs(project_physical(rho) - rho)) <= 1e-12

    def test_two_dim_example(self):
        np.testing.assert_allclose(project_physical(np.diag([1.1, -0.1])), np.diag([1.0, 0.0]), atol=1e-12)

    def test_simplex_by_hand(self):
        # spectrum (0.7, 0.5, -0.1, -0.1): shift by 0.1 and clip -> (0.6, 0.4, 0, 0)
        np.testing.assert_allclose(project_physical(np.diag([0.7, 0.5, -0.1, -0.1])),
                                   np.diag([0.6, 0.4, 0, 0]), atol=1e-12)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            project_physical(np.array([[0.5, 1], [0, 0.5]]))

    @given(st.integers(0, 2**32 - 1))
    def test_idempotent_and_physical(self, seed):
        rng = np.random.default_rng(seed)
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = h + h.conj().T
        h -= (np.trace(h).real - 1) * np.eye(4) / 4
        once = project_physical(h)
        assert qstate.is_density_matrix(once)
        assert np.max(np.abs(project_physical(once) - once)) <= 1e-12
        # Non-expansive towards any physical state.
        sigma = random_density(rng)
        assert np.linalg.norm(once - sigma) <= np.linalg.norm(h - sigma) + 1e-12

    def test_batched(self, rng):
        stack = np.stack([random_density(rng) for _ in range(3)])
        np.testing.assert_allclose(project_physical(stack), stack, atol=1e-12)


class TestFidelity:
    def test_werner_087(self):
        c = simulate_counts(qstate.werner(P87), TomographySettings(10_000), random_state=4)
        res = fidelity_with_bell(c, random_state=5)
        assert res.estimate == pytest.approx(0.87, abs=0.02)
        assert res.ci_low <= res.estimate <= res.ci_high
        assert res.entangled

    def test_maximally_mixed(self):
        c = simulate_counts(np.eye(4) / 4, TomographySettings(10_000), random_state=6)
        res = fidelity_with_bell(c, random_state=7)
        assert res.estimate == pytest.approx(0.25, abs=0.02)
        assert not res.entangled

    def test_werner_065_witnessed(self):
        p = (0.65 - 0.25) / 0.75
        c = simulate_counts(qstate.werner(p), TomographySettings(10_000), random_state=8)
        res = fidelity_with_bell(c, random_state=9)
        assert res.estimate == pytest.approx(0.65, abs=0.02)
        assert res.entangled

    def test_bootstrap_coverage(self):
        rho = qstate.werner(P87)
        hits = 0
        for s in np.random.SeedSequence(2718).spawn(200):
            rng = np.random.default_rng(s)
            res = fidelity_with_bell(simulate_counts(rho, TomographySettings(10_000), random_state=rng),
                                     random_state=rng)
            hits += res.ci_low <= 0.87 <= res.ci_high
        assert 0.60 <= hits / 200 <= 0.76

    def test_error_scaling(self):
        rng = np.random.default_rng(31)
        shots = np.array([100, 1_000, 10_000, 100_000])
        rho = qstate.werner(P87)
        errors = [np.mean([trace_distance(linear_inversion(simulate_counts(rho, TomographySettings(n),
                                                                            random_state=rng)), rho)
                           for _ in range(40)]) for n in shots]
        slope = np.polyfit(np.log(shots), np.log(errors), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.1)

    def test_estimator_api(self):
        c = simulate_counts(qstate.werner(P87), TomographySettings(2_000), random_state=10)
        est = LinearInversionTomography(n_bootstrap=50, random_state=0).fit(c)
        assert qstate.is_density_matrix(est.density_matrix_)
        assert est.bootstrap_fidelities().shape == (50,)
        assert est.get_params()["n_bootstrap"] == 50
        a = LinearInversionTomography(n_bootstrap=50, random_state=0).fit(c).fidelity_interval()
        assert a == est.fidelity_interval()


def test_real_part_csv(tmp_path):
    path = tomography.write_real_part_csv(BELL, tmp_path / "re.csv")
    rows = path.read_text().splitlines()
    assert rows[0] == "row,col,ket_row,ket_col,re"
    assert len(rows) == 17


def test_trace_distance():
    assert trace_distance(BELL, BELL) == 0.0
    assert trace_distance(np.diag([1, 0, 0, 0]), np.diag([0, 1, 0, 0])) == pytest.approx(1.0)
