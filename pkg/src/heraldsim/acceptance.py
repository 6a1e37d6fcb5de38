"""Acceptance suite: the eight reproduction and property criteria.

Each ``criterion_*`` function runs its check at the stated sample size and
returns a :class:`CriterionResult`; :func:`run_acceptance` runs them all.
A criterion with a runtime budget fails when the budget is exceeded.
"""

from __future__ import annotations

import tempfile
import time
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np

from . import channel, decoherence, qstate, readout, source, tomography
from .config import SCENARIOS, Model, ScenarioConfig, point_seed
from .scenarios import noise_scan_rates, run_scenario, simulate_fig3


@dataclass(frozen=True)
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    runtime_s: float
    budget_s: float | None = None

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        budget = f" / {self.budget_s:.0f} s" if self.budget_s else ""
        return f"C{self.number} {status}  {self.name}: {self.detail}  [{self.runtime_s:.2f} s{budget}]"


def _timed(number, name, budget, body):
    start = time.perf_counter()
    ok, detail = body()
    elapsed = time.perf_counter() - start
    if budget is not None and elapsed >= budget:
        ok, detail = False, f"{detail}; over the {budget:.0f} s budget"
    return CriterionResult(number, name, bool(ok), detail, elapsed, budget)


def _scenario_checks(scenario, seed, trials=None):
    with tempfile.TemporaryDirectory() as tmp:
        return run_scenario(ScenarioConfig(scenario, seed=seed, trials=trials, output_dir=tmp))


def criterion_1(seed=0, trials=100_000):
    """Mixture-model Monte Carlo against the linear noise-dilution model."""
    def body():
        worst = 0.0
        grid = product((0.87, 1.0), (0.0, 0.25, 0.5, 0.75, 1.0))
        for i, (f0, weight) in enumerate(grid):
            fid, _ = channel.sample_mixture_fidelity(weight, f0, trials, point_seed(seed, "c1", i))
            worst = max(worst, abs(fid - qstate.bell_fidelity_with_noise(weight, f0)))
        return worst <= 0.02, f"max |MC - model| = {worst:.4f} (tol 0.02)"
    return _timed(1, "noise-mixture fidelity model", 10, body)


def criterion_2(seed=0, attempts=1_000_000):
    def body():
        seeds = [point_seed(seed, "fig3_tomography", i) for i in range(3)]
        res = simulate_fig3(Model(), attempts, seeds, n_bootstrap=200)
        f_h = res["heralded"]["fidelity"].estimate
        f_all = res["resonant_all"]["fidelity"].estimate
        q, _, qh = res["efficiencies"]
        gain = qh.value / q.value
        ok = abs(f_h - 0.87) <= 0.02 and abs(f_all - 0.65) <= 0.02 and abs(gain - 1.58) <= 0.05
        return ok, f"F_heralded = {f_h:.4f}, F_all = {f_all:.4f}, gain = {gain:.4f}"
    return _timed(2, "tomography fidelities and heralding gain", 60, body)


def criterion_3(seed=0, trials=100_000):
    def body():
        model = Model()
        rates, calibrated = noise_scan_rates(model)
        modes = [channel.fixed_mode(model.scan.fixed_gate_ns), channel.herald_mode(model.scan.herald_gate_ns)]
        analytic = channel.fidelity_vs_noise(rates, model.source, modes, reference=model.channel)
        fixed = [r["fidelity_analytic"] for r in analytic if r["mode"] == channel.FIXED]
        herald = [r["fidelity_analytic"] for r in analytic if r["mode"] == channel.HERALD]
        dominates = all(h > f for h, f, rate in zip(herald, fixed, rates) if rate > 0)
        seeds = [point_seed(seed, "c3", k) for k in range(2)]
        mc = channel.fidelity_vs_noise([calibrated], model.source, modes, trials, seeds, model.channel)
        f_fixed, f_herald = (r["fidelity_mc"] for r in mc)
        ok = abs(f_fixed - 0.48) <= 0.03 and abs(f_herald - 0.75) <= 0.03 and dominates
        return ok, (f"at {calibrated:.4g} Hz: fixed {f_fixed:.4f}, herald {f_herald:.4f}; "
                    f"herald dominates: {dominates}")
    return _timed(3, "noise-scan endpoints and dominance", 60, body)


def criterion_4(seed=0):
    def body():
        res = _scenario_checks("appx_precession", seed, 10_000)
        period = res.metadata.get("fit", {}).get("period_us", float("nan"))
        return abs(period - 5.0) <= 0.1, f"fitted period = {period:.4f} us"
    return _timed(4, "precession period", 30, body)


def criterion_5(seed=0):
    def body():
        res = _scenario_checks("fig3d_delay", seed, 10_000)
        tau = res.metadata.get("fit", {}).get("tau_us", float("nan"))
        return abs(tau - 206.0) <= 10.0, f"fitted decay time = {tau:.2f} us"
    return _timed(5, "Gaussian decay time", 30, body)


def criterion_6(seed=0):
    def body():
        params = readout.ReadoutParams()
        fid = readout.readout_fidelity(params)
        durations = np.linspace(0.5, 15.0, 30)
        curve = readout.readout_fidelity_vs_duration(durations, params)
        monotone = bool(np.all(np.diff(curve) > 0))
        counts, fb, _ = readout.count_histogram(params, 100_000, point_seed(seed, "c6", 0))
        bright = float(np.dot(counts, fb))
        ok = abs(fid - 0.990) <= 0.003 and monotone and abs(bright - 20.0) <= 0.5
        return ok, f"fidelity = {fid:.4f}, monotone: {monotone}, bright mean = {bright:.3f}"
    return _timed(6, "readout fidelity and histogram", 10, body)


def criterion_7():
    def body():
        pi = float(readout.rabi_population(readout.PI_TRANSFER.pi_time, readout.PI_TRANSFER))
        half = float(readout.rabi_population(readout.BASIS_ROTATION.pi_time / 2, readout.BASIS_ROTATION))
        ok = abs(pi - 0.95) <= 1e-12 and abs(half - 0.48) <= 1e-12
        return ok, f"pi point = {pi:.15f}, pi/2 point = {half:.15f}"
    return _timed(7, "Rabi contrast points", None, body)


# --- criterion 8 -----------------------------------------------------------


def _produced_states(seed):
    """Every kind of state the simulator builds, over representative inputs."""
    sp = source.SourceParams()
    states = [source.branch_state(b, sp) for b in (source.HERALDED_PAIR, source.QUBIT_ONLY)]
    states += [qstate.werner(w) for w in np.linspace(0, 1, 11)]
    heralded = states[0]
    larmor = decoherence.LarmorParams()
    states += [decoherence.evolve(heralded, t, larmor) for t in np.linspace(0, 400, 17)]
    states += [qstate.mix_with_white_noise(heralded, w) for w in np.linspace(0, 1, 5)]
    for axis in ("x", "y", "z"):
        theta, phi = readout.basis_rotation_angles(qstate.PAULI_AXES[axis])
        states.append(readout.mw_rotation(heralded, theta, phi, 0.04))
    seeds = [point_seed(seed, "c8-states", i) for i in range(3)]
    fig3 = simulate_fig3(Model(), 20_000, seeds, n_bootstrap=10)
    states += [fig3[name]["estimator"].density_matrix_ for name in ("nonresonant", "resonant_all", "heralded")]
    return states


def error_scaling_slope(seed=0, shots=(100, 1_000, 10_000, 100_000), reps=40):
    """Log-log slope of mean trace-distance reconstruction error against shots per setting."""
    rng = np.random.default_rng(point_seed(seed, "c8-slope", 0))
    rho = source.branch_state(source.HERALDED_PAIR, source.SourceParams())
    errors = []
    for n in shots:
        settings = tomography.TomographySettings(n)
        err = [
            tomography.trace_distance(
                tomography.linear_inversion(tomography.simulate_counts(rho, settings, random_state=rng)), rho)
            for _ in range(reps)
        ]
        errors.append(np.mean(err))
    slope, _ = np.polyfit(np.log(shots), np.log(errors), 1)
    return float(slope)


def _csv_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(Path(root).rglob("*")) if p.is_file()}


def _determinism(seed, trials=2_000):
    """Two full runs at a reduced trial count, the second with two workers."""
    snapshots = []
    with tempfile.TemporaryDirectory() as tmp:
        for run, workers in enumerate((1, 2)):
            base = Path(tmp) / f"run{run}"
            for scenario in SCENARIOS:
                cfg = ScenarioConfig(scenario, seed=seed, trials=trials, output_dir=base, workers=workers)
                run_scenario(cfg)
            snapshots.append(_csv_bytes(base))
    return snapshots[0] == snapshots[1] and len(snapshots[0]) > 0


def property_checks(seed=0):
    """Named boolean checks making up criterion 8."""
    rng = np.random.default_rng(point_seed(seed, "c8", 0))
    checks = {}

    states = _produced_states(seed)
    checks["density-matrix invariants"] = all(qstate.is_density_matrix(r) for r in states)

    reduced = qstate.partial_trace(qstate.density_of(qstate.bell_state_psi()), qstate.ATOM)
    checks["partial trace of Bell state"] = bool(np.max(np.abs(reduced - np.eye(2) / 2)) <= 1e-12)

    worst = 0.0
    for _ in range(20):
        g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        rho = g @ g.conj().T
        rho /= np.trace(rho).real
        back = tomography.invert_probabilities(tomography.setting_probabilities(rho))
        worst = max(worst, float(np.max(np.abs(back - rho))))
    checks["tomography round trip"] = worst <= 1e-12

    slope = error_scaling_slope(seed)
    checks[f"error scaling slope {slope:.3f}"] = abs(slope + 0.5) <= 0.1

    idem = 0.0
    for _ in range(20):
        h = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        h = h + h.conj().T
        h = h - (np.trace(h).real - 1) * np.eye(4) / 4
        once = tomography.project_physical(h)
        idem = max(idem, float(np.max(np.abs(tomography.project_physical(once) - once))))
    checks["projection idempotence"] = idem <= 1e-12

    checks["byte-identical reruns"] = _determinism(seed)
    return checks


def criterion_8(seed=0):
    def body():
        checks = property_checks(seed)
        failed = [k for k, ok in checks.items() if not ok]
        detail = "all properties hold" if not failed else "failed: " + ", ".join(failed)
        return not failed, detail + f" ({len(checks)} checks)"
    return _timed(8, "property suite", None, body)


CRITERIA = (criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8)


def run_acceptance(seed=0):
    return [c() if c is criterion_7 else c(seed=seed) for c in CRITERIA]


def format_table(results):
    lines = [r.line() for r in results]
    passed = sum(r.passed for r in results)
    lines.append(f"{passed}/{len(results)} criteria passed")
    return "\n".join(lines)
