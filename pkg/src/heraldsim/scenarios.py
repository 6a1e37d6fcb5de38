"""End-to-end scenarios, one per simulated measurement campaign.

Each scenario takes a :class:`~heraldsim.config.ScenarioConfig`, runs its
sweep with one independent random stream per sweep point, writes
plot-ready CSV files (each with a ``.meta.json`` sidecar) and returns a
:class:`ScenarioResult` with the per-point records and PASS/FAIL checks
against the reference values.
"""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.stats import norm

from . import channel, decoherence, qstate, readout, source, tomography
from .config import SCENARIOS, ConfigError, ScenarioConfig, point_seed
from .fitting import CosineFit, FitError, GaussianDecayFit

DEFAULT_TRIALS = {
    "fig2_readout": 100_000,
    "fig3_tomography": 1_000_000,
    "fig3d_delay": 10_000,
    "fig4_timing": 100_000,
    "fig4c_noise": 100_000,
    "appx_rabi": 10_000,
    "appx_precession": 10_000,
}

# two-sided 3 sigma coverage
FAMILYWISE_LEVEL = 0.9973002039367398


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    target: float
    tolerance: float
    passed: bool

    @classmethod
    def near(cls, name, value, target, tolerance):
        return cls(name, float(value), float(target), float(tolerance),
                   bool(abs(value - target) <= tolerance))

    @classmethod
    def flag(cls, name, ok):
        return cls(name, float(bool(ok)), 1.0, 0.0, bool(ok))

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        if self.tolerance == 0 and self.target == 1.0 and self.value in (0.0, 1.0):
            return f"[{status}] {self.name}"
        return f"[{status}] {self.name}: {self.value:.4f} (target {self.target:.4f} +/- {self.tolerance:.4g})"


@dataclass
class ScenarioResult:
    """Per-point aggregates of a scenario run.

    ``records`` hold every CSV column; ``value_key``, ``estimate_key`` and
    ``analytic_key`` name the sweep value, the Monte Carlo estimate and the
    analytic reference inside each record.
    """

    scenario: str
    sweep_variable: str
    sweep_unit: str
    records: list
    value_key: str
    estimate_key: str
    analytic_key: str | None
    metadata: dict
    checks: list = field(default_factory=list)
    files: list = field(default_factory=list)

    def __post_init__(self):
        for rec in self.records:
            est, lo, hi = rec.get(self.estimate_key), rec.get("ci_low"), rec.get("ci_high")
            if None in (est, lo, hi) or np.isnan([est, lo, hi]).any():
                continue
            if not lo - 1e-12 <= est <= hi + 1e-12:
                raise ValueError(f"{self.scenario}: interval [{lo}, {hi}] does not contain {est}")

    def points(self):
        """Uniform view: (value, estimate, ci_low, ci_high, analytic_reference)."""
        return [
            (r[self.value_key], r.get(self.estimate_key), r.get("ci_low"), r.get("ci_high"),
             r.get(self.analytic_key) if self.analytic_key else None)
            for r in self.records
        ]

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def summary(self):
        head = f"{self.scenario}: {len(self.records)} points over {self.sweep_variable} [{self.sweep_unit}]"
        return "\n".join([head] + ["  " + c.line() for c in self.checks])


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path, columns, rows, meta):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])
    write_sidecar(path, meta, columns)
    return path


def write_sidecar(path, meta, columns=None):
    """``<name>.meta.json`` next to a CSV: run metadata plus its column list."""
    path = Path(path)
    if columns is None:
        with path.open(newline="") as fh:
            columns = next(csv.reader(fh))
    sidecar = path.with_suffix(".meta.json")
    sidecar.write_text(json.dumps({**meta, "columns": list(columns)}, indent=2, sort_keys=True) + "\n")
    return sidecar


def _prepare_output(out):
    out = Path(out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    return out


def _map(fn, tasks, workers):
    if workers <= 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def _binomial_ci(k, n):
    est = k / n
    se = np.sqrt(max(est * (1 - est), 0.0) / n)
    return est, est - se, est + se


# --------------------------------------------------------------------------
# fig2_readout


def _readout_point(params, trials, seed):
    rng = np.random.default_rng(seed)
    bright = readout.fluorescence_counts(readout.F2, params, rng, size=trials)
    dark = readout.fluorescence_counts(readout.F1, params, rng, size=trials)
    thr = readout.resolved_threshold(params)
    good = int((bright >= thr).sum() + (dark < thr).sum())
    est, lo, hi = _binomial_ci(good, 2 * trials)
    return {
        "duration_us": params.duration,
        "fidelity": readout.readout_fidelity(params),
        "fidelity_mc": est,
        "ci_low": lo,
        "ci_high": hi,
        "threshold": thr,
    }


def run_fig2_readout(cfg, model, trials, out, meta):
    scan = model.scan
    durations = np.linspace(scan.duration_max_us / scan.duration_points, scan.duration_max_us,
                            scan.duration_points)
    durations = np.unique(np.append(durations, readout.REFERENCE_DURATION_US))
    tasks = [(replace(model.readout, duration=float(d)), trials, point_seed(cfg.seed, cfg.scenario, i))
             for i, d in enumerate(durations)]
    records = _map(_readout_point, tasks, cfg.workers)

    hist_params = replace(model.readout, duration=scan.histogram_duration_us)
    hist_seed = point_seed(cfg.seed, cfg.scenario, len(durations))
    counts, fb, fd = readout.count_histogram(hist_params, trials, hist_seed)
    bright_mean = float(np.dot(counts, fb))
    dark_mean = float(np.dot(counts, fd))

    files = [
        write_csv(out / "readout_fidelity.csv",
                  ["duration_us", "fidelity", "fidelity_mc", "ci_low", "ci_high", "threshold"], records, meta),
        write_csv(out / "readout_histogram.csv", ["counts", "frequency_bright", "frequency_dark"],
                  [{"counts": int(c), "frequency_bright": b, "frequency_dark": d}
                   for c, b, d in zip(counts, fb, fd)], meta),
    ]
    ref = next(r for r in records if np.isclose(r["duration_us"], readout.REFERENCE_DURATION_US))
    analytic = [r["fidelity"] for r in records]
    checks = [
        Check.near("readout fidelity at 7.5 us (analytic)", ref["fidelity"], 0.990, 0.003),
        Check.near("readout fidelity at 7.5 us (Monte Carlo)", ref["fidelity_mc"], 0.990, 0.003),
        Check.flag("fidelity increases with duration", np.all(np.diff(analytic) > 0)),
        Check.near("bright histogram mean counts", bright_mean, 20.0, 0.5),
    ]
    meta["bright_mean"] = bright_mean
    meta["dark_mean"] = dark_mean
    return ScenarioResult(cfg.scenario, "duration", "us", records, "duration_us", "fidelity_mc",
                          "fidelity", meta, checks, files)


# --------------------------------------------------------------------------
# fig3_tomography

CONFIGURATIONS = ("nonresonant", "resonant_all", "heralded")


def _sample_setting_outcomes(prob_tables, state_idx, rng):
    """Random Pauli setting and outcome per qubit event; tables are (states, 9, 4)."""
    m = len(state_idx)
    setting = rng.integers(0, len(tomography.PAULI_PAIRS), size=m)
    cdf = np.cumsum(prob_tables, axis=-1)[state_idx, setting]
    outcome = (rng.random(m)[:, None] >= cdf[:, :3]).sum(axis=1)
    return setting, outcome


def _counts_from(setting, outcome, mask):
    n = len(tomography.PAULI_PAIRS)
    flat = np.bincount(setting[mask] * 4 + outcome[mask], minlength=4 * n)
    return tomography.CountsTable(tomography.PAULI_PAIRS, flat.reshape(n, 4))


def simulate_fig3(model, attempts, seeds, n_bootstrap=200):
    """Source + tomography run behind the density-matrix scenario.

    ``seeds`` supplies three independent streams: the nonresonant run, the
    resonant run and the bootstrap.  Returns a dict keyed by configuration
    with counts, fitted tomography and fidelity interval, plus the
    efficiency estimates of the resonant run.
    """
    sp = model.source
    rng_a, rng_b, rng_boot = (np.random.default_rng(s) for s in seeds)

    # Herald cavity off resonance: heralding disabled, one noisy state.
    rho_nr = qstate.werner(qstate.white_noise_weight(sp.f_nonresonant))
    has_qubit = rng_a.random(attempts) < sp.eta_q
    table_nr = tomography.setting_probabilities(rho_nr)[None]
    s_nr, o_nr = _sample_setting_outcomes(table_nr, np.zeros(int(has_qubit.sum()), dtype=int), rng_a)

    events = source.sample_events(sp, attempts, rng_b)
    states = [source.branch_state(b, sp) for b in (source.HERALDED_PAIR, source.QUBIT_ONLY)]
    tables = np.stack([tomography.setting_probabilities(r) for r in states])
    qubit = events.qubit_detected
    branch = events.branch[qubit]
    s_res, o_res = _sample_setting_outcomes(tables, branch, rng_b)
    heralded = branch == source.BRANCHES.index(source.HERALDED_PAIR)

    counts = {
        "nonresonant": _counts_from(s_nr, o_nr, np.ones(len(s_nr), dtype=bool)),
        "resonant_all": _counts_from(s_res, o_res, np.ones(len(s_res), dtype=bool)),
        "heralded": _counts_from(s_res, o_res, heralded),
    }
    result = {}
    for name in CONFIGURATIONS:
        est = tomography.LinearInversionTomography(n_bootstrap, random_state=rng_boot).fit(counts[name])
        result[name] = {"counts": counts[name], "estimator": est, "fidelity": est.fidelity_interval()}
    result["efficiencies"] = source.estimate_efficiencies(events)
    result["events"] = events
    return result


def run_fig3_tomography(cfg, model, trials, out, meta):
    seeds = [point_seed(cfg.seed, cfg.scenario, i) for i in range(3)]
    res = simulate_fig3(model, trials, seeds, model.scan.n_bootstrap)
    expected = {"nonresonant": model.source.f_nonresonant, "resonant_all": model.source.f_all,
                "heralded": model.source.f_heralded}
    files, records = [], []
    for i, name in enumerate(CONFIGURATIONS):
        fid = res[name]["fidelity"]
        est = res[name]["estimator"]
        files.append(res[name]["counts"].to_csv(out / f"counts_{name}.csv"))
        files.append(qstate.write_matrix_csv(est.density_matrix_, out / f"density_{name}.csv"))
        files.append(tomography.write_real_part_csv(est.density_matrix_, out / f"density_real_{name}.csv"))
        records.append({
            "configuration": name,
            "index": i,
            "events": int(res[name]["counts"].shots.sum()),
            "fidelity": fid.estimate,
            "ci_low": fid.ci_low,
            "ci_high": fid.ci_high,
            "entangled": fid.entangled,
            "fidelity_model": expected[name],
        })
    files.append(write_csv(out / "fidelities.csv",
                           ["configuration", "events", "fidelity", "ci_low", "ci_high", "entangled",
                            "fidelity_model"], records, meta))

    eff_q, eff_h, eff_qh = res["efficiencies"]
    eff_rows = [
        {"quantity": "eta_q", "estimate": eff_q.value, "ci_low": eff_q.ci_low, "ci_high": eff_q.ci_high,
         "model": model.source.eta_q},
        {"quantity": "eta_h", "estimate": eff_h.value, "ci_low": eff_h.ci_low, "ci_high": eff_h.ci_high,
         "model": model.source.eta_h},
        {"quantity": "eta_q_given_h", "estimate": eff_qh.value, "ci_low": eff_qh.ci_low,
         "ci_high": eff_qh.ci_high, "model": model.source.eta_q_given_h},
    ]
    files.append(write_csv(out / "efficiencies.csv", ["quantity", "estimate", "ci_low", "ci_high", "model"],
                           eff_rows, meta))
    if trials <= 100_000 and model.scan.write_events:
        files.append(res["events"].to_csv(out / "events.csv"))

    gain = eff_qh.value / eff_q.value
    checks = [
        Check.near("heralded fidelity", records[2]["fidelity"], 0.87, 0.02),
        Check.near("all-qubit-event fidelity", records[1]["fidelity"], 0.65, 0.02),
        Check.near("nonresonant fidelity", records[0]["fidelity"], 0.29, 0.03),
        Check.near("heralding efficiency gain", gain, 0.68 / 0.43, 0.05),
        Check.near("eta_q", eff_q.value, 0.43, 0.03),
        Check.near("eta_h", eff_h.value, 0.34, 0.02),
        Check.near("eta_q|h", eff_qh.value, 0.68, 0.03),
        Check.flag("heralded state witnessed entangled", records[2]["entangled"]),
    ]
    meta["heralding_gain"] = gain
    return ScenarioResult(cfg.scenario, "configuration", "index", records, "index", "fidelity",
                          "fidelity_model", meta, checks, files)


# --------------------------------------------------------------------------
# fig3d_delay


def _delay_point(larmor, f0, delay, trials, seed):
    return decoherence.fidelity_vs_delay(larmor, f0, [delay], trials=trials, random_state=seed)[0]


def run_fig3d_delay(cfg, model, trials, out, meta):
    scan = model.scan
    delays = np.arange(0.0, scan.delay_max_us + 0.5 * scan.delay_step_us, scan.delay_step_us)
    tasks = [(model.larmor, model.source.f_heralded, float(t), trials, point_seed(cfg.seed, cfg.scenario, i))
             for i, t in enumerate(delays)]
    records = _map(_delay_point, tasks, cfg.workers)
    files = [write_csv(out / "fidelity_vs_delay.csv",
                       ["delay_us", "fidelity_analytic", "fidelity_mc", "ci_low", "ci_high"], records, meta)]
    checks = []
    try:
        fit = GaussianDecayFit().fit(delays, [r["fidelity_mc"] for r in records])
        meta["fit"] = {"tau_us": fit.tau_, "floor": fit.floor_, "amplitude": fit.amplitude_,
                       "residual": fit.residual_}
        checks.append(Check.near("fitted Gaussian decay time [us]", fit.tau_, 206.0, 10.0))
    except FitError as exc:
        meta["fit_error"] = str(exc)
        checks.append(Check.flag(f"Gaussian decay fit ({exc})", False))
    checks.append(Check.near("fidelity at zero delay", records[0]["fidelity_analytic"],
                             model.source.f_heralded, 1e-9))
    return ScenarioResult(cfg.scenario, "delay", "us", records, "delay_us", "fidelity_mc",
                          "fidelity_analytic", meta, checks, files)


# --------------------------------------------------------------------------
# fig4_timing


def _gate_point(events, heralds, mode, width, src, seed):
    params = channel.herald_mode(width) if mode == channel.HERALD else channel.fixed_mode(width)
    in_gate, _ = channel.gate_stream(events, params, src, seed)
    est, lo, hi = _binomial_ci(int((in_gate & events.herald_detected).sum()), heralds)
    return {"gate_ns": width, "mode": mode, "efficiency_mc": est, "ci_low": lo, "ci_high": hi,
            "efficiency_analytic": channel.heralded_signal(params, src)}


def run_fig4_timing(cfg, model, trials, out, meta):
    sp, scan = model.source, model.scan
    events = source.sample_events(sp, trials, point_seed(cfg.seed, cfg.scenario, 0))
    files = []
    if model.scan.write_events:
        files.append(events.to_csv(out / "events.csv"))

    pair = events.branch == source.BRANCHES.index(source.HERALDED_PAIR)
    delay = events.t_qubit[pair] - events.t_herald[pair]
    bins = np.arange(0.0, 400.0 + scan.histogram_bin_ns, scan.histogram_bin_ns)
    hist_delay, _ = np.histogram(delay, bins)
    hist_q, _ = np.histogram(events.t_qubit[events.qubit_detected], bins)
    hist_h, _ = np.histogram(events.t_herald[events.herald_detected], bins)
    files.append(write_csv(out / "detection_times.csv", ["time_ns", "qubit_counts", "herald_counts"],
                           [{"time_ns": t, "qubit_counts": int(q), "herald_counts": int(h)}
                            for t, q, h in zip(bins[:-1], hist_q, hist_h)], meta))
    files.append(write_csv(out / "coincidence_delay.csv", ["delay_ns", "coincidences"],
                           [{"delay_ns": t, "coincidences": int(c)} for t, c in zip(bins[:-1], hist_delay)],
                           meta))

    heralds = int(events.herald_detected.sum())
    widths = np.linspace(scan.gate_max_ns / scan.gate_points, scan.gate_max_ns, scan.gate_points)
    tasks = []
    for mode in (channel.FIXED, channel.HERALD):
        for w in widths:
            tasks.append((events, heralds, mode, float(w), sp, point_seed(cfg.seed, cfg.scenario, 1 + len(tasks))))
    records = _map(_gate_point, tasks, cfg.workers)
    files.append(write_csv(out / "efficiency_vs_gate.csv",
                           ["gate_ns", "mode", "efficiency_mc", "ci_low", "ci_high", "efficiency_analytic"],
                           records, meta))

    mean_delay = float(delay.mean())
    se_delay = float(delay.std(ddof=1) / np.sqrt(delay.size))
    short = [r for r in records if np.isclose(r["gate_ns"], scan.herald_gate_ns)]
    by_mode = {r["mode"]: r for r in short}
    checks = [
        Check.near("mean qubit-herald delay [ns]", mean_delay, sp.tau_delta, 3 * se_delay),
    ]
    if len(by_mode) == 2:
        checks.append(Check.flag("herald-referenced gate captures more at short gates",
                                 by_mode[channel.HERALD]["efficiency_mc"] > by_mode[channel.FIXED]["efficiency_mc"]))
    return ScenarioResult(cfg.scenario, "gate", "ns", records, "gate_ns", "efficiency_mc",
                          "efficiency_analytic", meta, checks, files)


# --------------------------------------------------------------------------
# fig4c_noise


def _noise_point(rate, mode, src, reference, trials, seed):
    return channel.fidelity_vs_noise([rate], src, [mode], trials, [seed], reference)[0]


def noise_scan_rates(model):
    scan = model.scan
    rates = np.logspace(np.log10(scan.noise_min_hz), np.log10(scan.noise_max_hz), scan.noise_points)
    calibrated = channel.calibrated_noise_rate(model.source, gate=channel.fixed_mode(scan.fixed_gate_ns))
    return np.concatenate([[0.0], np.sort(np.append(rates, calibrated))]), calibrated


def run_fig4c_noise(cfg, model, trials, out, meta):
    scan = model.scan
    rates, calibrated = noise_scan_rates(model)
    modes = [channel.fixed_mode(scan.fixed_gate_ns), channel.herald_mode(scan.herald_gate_ns)]
    tasks = []
    for rate in rates:
        for mode in modes:
            tasks.append((float(rate), mode, model.source, model.channel, trials,
                          point_seed(cfg.seed, cfg.scenario, len(tasks))))
    records = _map(_noise_point, tasks, cfg.workers)
    columns = ["noise_rate_hz", "equivalent_km", "mode", "gate_ns", "p", "fidelity_analytic",
               "fidelity_mc", "ci_low", "ci_high"]
    files = [write_csv(out / "fidelity_vs_noise.csv", columns, records, meta)]
    meta["calibrated_noise_rate_hz"] = calibrated
    checks = noise_checks(records, calibrated, model.source.f_heralded)
    return ScenarioResult(cfg.scenario, "noise_rate", "Hz", records, "noise_rate_hz", "fidelity_mc",
                          "fidelity_analytic", meta, checks, files)


def familywise_z(n_points, level=FAMILYWISE_LEVEL):
    """Per-point z bound such that all ``n_points`` independent estimates fall
    inside it with probability ``level`` (Sidak correction)."""
    per_point = level ** (1.0 / n_points)
    return float(norm.ppf(0.5 + per_point / 2))


def noise_checks(records, calibrated, f_heralded):
    fixed = [r for r in records if r["mode"] == channel.FIXED]
    herald = [r for r in records if r["mode"] == channel.HERALD]
    at_cal = {r["mode"]: r for r in records if r["noise_rate_hz"] == calibrated}
    zero = [r for r in records if r["noise_rate_hz"] == 0]
    dominance = all(h["fidelity_analytic"] > f["fidelity_analytic"]
                    for f, h in zip(fixed, herald) if f["noise_rate_hz"] > 0)
    z = familywise_z(len(records))
    agreement = all(abs(r["fidelity_mc"] - r["fidelity_analytic"]) <= z * (r["ci_high"] - r["fidelity_mc"])
                    + 1e-12 for r in records)
    checks = [Check.near(f"noise-free fidelity ({r['mode']})", r["fidelity_analytic"], f_heralded, 1e-12)
              for r in zero]
    checks += [
        Check.near("fixed 400 ns gate at calibrated noise", at_cal[channel.FIXED]["fidelity_analytic"], 0.48, 0.03),
        Check.near("fixed 400 ns gate at calibrated noise (MC)", at_cal[channel.FIXED]["fidelity_mc"], 0.48, 0.03),
        Check.near("herald 40 ns gate at calibrated noise", at_cal[channel.HERALD]["fidelity_analytic"], 0.75, 0.03),
        Check.near("herald 40 ns gate at calibrated noise (MC)", at_cal[channel.HERALD]["fidelity_mc"], 0.75, 0.03),
        Check.flag("herald-referenced curve dominates for noise > 0", dominance),
        Check.flag(f"Monte Carlo within {z:.2f} sigma of analytic at every point (familywise 3 sigma)",
                   agreement),
    ]
    return checks


# --------------------------------------------------------------------------
# appx_rabi


def _rabi_point(rabi, t, trials, seed):
    rng = np.random.default_rng(seed)
    pop = float(readout.rabi_population(t, rabi))
    est, lo, hi = _binomial_ci(int(rng.binomial(trials, pop)), trials)
    return {"pulse_us": t, "transition": rabi.transition, "population_mc": est, "ci_low": lo,
            "ci_high": hi, "population_analytic": pop}


def run_appx_rabi(cfg, model, trials, out, meta):
    scan = model.scan
    tasks = []
    for rabi in (model.transfer, model.rotation):
        for t in np.linspace(0.0, scan.rabi_max_pulses * rabi.pi_time, scan.rabi_points):
            tasks.append((rabi, float(t), trials, point_seed(cfg.seed, cfg.scenario, len(tasks))))
    records = _map(_rabi_point, tasks, cfg.workers)
    files = [write_csv(out / "rabi.csv", ["pulse_us", "transition", "population_mc", "ci_low", "ci_high",
                                          "population_analytic"], records, meta)]
    pi_pop = float(readout.rabi_population(model.transfer.pi_time, model.transfer))
    half_pop = float(readout.rabi_population(model.rotation.pi_time / 2, model.rotation))
    checks = [
        Check.near("pi pulse on |i>-|up>", pi_pop, 0.95, 1e-12),
        Check.near("pi/2 pulse on |i>-|down>", half_pop, 0.96 / 2, 1e-12),
    ]
    return ScenarioResult(cfg.scenario, "pulse", "us", records, "pulse_us", "population_mc",
                          "population_analytic", meta, checks, files)


# --------------------------------------------------------------------------
# appx_precession


def _precession_point(rho0, larmor, t, trials, seed):
    rng = np.random.default_rng(seed)
    rho_t = decoherence.evolve(rho0, t, larmor)
    probs = qstate.measure_prob(rho_t, qstate.PAULI_AXES["x"], qstate.PAULI_AXES["x"])
    n = rng.multinomial(trials, probs)
    c = (n[0] + n[3] - n[1] - n[2]) / trials
    se = np.sqrt(max(1 - c * c, 0.0) / trials)
    return {"time_us": t, "c_ap_mc": c, "ci_low": c - se, "ci_high": c + se,
            "c_ap_analytic": decoherence.correlation_parameter(rho_t, 0.0)}


def run_appx_precession(cfg, model, trials, out, meta):
    scan = model.scan
    rho0 = source.branch_state(source.HERALDED_PAIR, model.source)
    times = np.arange(0.0, scan.precession_max_us + 0.5 * scan.precession_step_us, scan.precession_step_us)
    tasks = [(rho0, model.larmor, float(t), trials, point_seed(cfg.seed, cfg.scenario, i))
             for i, t in enumerate(times)]
    records = _map(_precession_point, tasks, cfg.workers)
    files = [write_csv(out / "correlation_vs_time.csv",
                       ["time_us", "c_ap_mc", "ci_low", "ci_high", "c_ap_analytic"], records, meta)]
    try:
        fit = CosineFit().fit(times, [r["c_ap_mc"] for r in records])
        meta["fit"] = {"period_us": fit.period_, "amplitude": fit.amplitude_, "phase": fit.phase_,
                       "residual": fit.residual_}
        checks = [Check.near("fitted precession period [us]", fit.period_, 5.0, 0.1)]
    except FitError as exc:
        meta["fit_error"] = str(exc)
        checks = [Check.flag(f"precession fit ({exc})", False)]
    return ScenarioResult(cfg.scenario, "time", "us", records, "time_us", "c_ap_mc", "c_ap_analytic",
                          meta, checks, files)


RUNNERS = {
    "fig2_readout": run_fig2_readout,
    "fig3_tomography": run_fig3_tomography,
    "fig3d_delay": run_fig3d_delay,
    "fig4_timing": run_fig4_timing,
    "fig4c_noise": run_fig4c_noise,
    "appx_rabi": run_appx_rabi,
    "appx_precession": run_appx_precession,
}
assert set(RUNNERS) == set(SCENARIOS)


def run_scenario(cfg):
    """Run one scenario, write its CSV files and return the result.

    Output depends only on (scenario, seed, trials, overrides); the worker
    count only changes wall time.
    """
    if not isinstance(cfg, ScenarioConfig):
        raise ConfigError("run_scenario expects a ScenarioConfig")
    model = cfg.model()
    trials = cfg.trials or DEFAULT_TRIALS[cfg.scenario]
    out = _prepare_output(cfg.out)
    meta = {
        "scenario": cfg.scenario,
        "seed": cfg.seed,
        "trials": trials,
        "overrides": dict(sorted(cfg.overrides.items())),
        "parameters": model.snapshot(),
    }
    start = time.perf_counter()
    result = RUNNERS[cfg.scenario](cfg, model, trials, out, meta)
    # Rewritten at the end so every sidecar carries the final metadata (fits etc.).
    for path in list(result.files):
        if Path(path).suffix == ".csv":
            write_sidecar(path, meta)
    result.metadata = {**meta, "runtime_s": time.perf_counter() - start}
    summary = out / "summary.txt"
    summary.write_text(result.summary() + "\n")
    result.files.append(summary)
    return result
