"""Command-line front end.

    jumpsense SUBCOMMAND [--spec FILE.toml] [--out DIR] [--seed N]
                         [--threads N] [--print-defaults]

Every output carries the fully resolved configuration.  Outputs depend
only on the configuration, so equal specs give byte-identical files.
"""

from __future__ import annotations

import argparse
import copy
import json
import os
import sys
import tempfile
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import tomli

from . import analytic, estimate, klcheck, master, protocols, qlin, trajectory

SCHEMA_VERSION = 1

CODE_DEFAULTS = {
    "name": "example_i",
    "strategy": "exact_term",
    "gap": 50.0,
    "zeno_interval": 0.01,
    "theta": 0.0,
    "phi": 0.0,
    "b": 1.0,
    "g1": 0.3,
    "g2": 0.2,
}
NOISE_DEFAULTS = {
    "gamma": 1.0,
    "loss_alpha": 0.0,
    "dark_rate": 0.0,
    "dead_time": 0.0,
    "correction_delay": 0.0,
}
ANALYTIC_DEFAULTS = {
    "tau": 0.2,
    "g": 0.2,
    "gamma": 1.0,
    "t_min": 5.0,
    "t_max": 140.0,
    "n_points": 135,
    "n_samples": 2000,
    "seed": 0,
    "weighted": False,
}

DEFAULTS = {
    "trajectory": {
        "code": CODE_DEFAULTS,
        "noise": NOISE_DEFAULTS,
        "run": {"g": 0.2, "duration": 20.0, "dt": 0.005, "n_traj": 1000, "seed": 0,
                "record_interval": 0.5, "readout_phase": 0.0, "jumps_during_delay": False,
                "delay_dark_counts": True, "refocus_dead_time": False},
    },
    "master": {
        "code": CODE_DEFAULTS,
        "noise": NOISE_DEFAULTS,
        "run": {"g": 0.2, "duration": 50.0, "dt": 0.005, "variant": "corrected",
                "tau_ec": 0.01, "record_interval": 0.1, "readout_phase": 0.0, "fit": True},
    },
    "analytic": {"delay": ANALYTIC_DEFAULTS},
    "fig2": {"delay": ANALYTIC_DEFAULTS},
    "klcheck": {
        "code": CODE_DEFAULTS,
        "check": {"code_file": "", "g": 0.2, "tol": 1e-9, "n_random": 1000, "seed": 0,
                  "homodyne_b": 1.0, "homodyne_codes": 100},
    },
    "table1": {
        "sweep": {"alphas": [0.01, 0.03, 0.05, 0.08], "g": 0.01, "gamma": 1.0,
                  "fit_g": 0.2, "fit_duration": 60.0, "dt": 0.005,
                  "reference_decay": [0.02, 0.06, 0.11, 0.2],
                  "reference_frequency": [2.02, 2.09, 2.2, 2.66],
                  "reference_sensitivity": [0.07, 0.11, 0.15, 0.16]},
    },
    "sensitivity": {
        "study": {"gamma": 1.0, "g": 0.2, "g_small": 0.001,
                  "totals": [10.0, 31.6227766, 100.0, 316.227766, 1000.0],
                  "alphas": [0.005, 0.01, 0.02, 0.03], "alpha_total": 1000.0, "n_grid": 4000},
    },
}

NUMERIC_ERRORS = (qlin.ExpmError, master.IntegrationError, trajectory.TrajectoryError,
                  estimate.FitError, analytic.DegenerateProbability, FloatingPointError)


class SpecError(ValueError):
    """Invalid experiment specification."""


# --- spec handling --------------------------------------------------------

def _merge(defaults: dict, given: dict, path: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise SpecError(f"unknown key {where!r}")
        ref = defaults[key]
        if isinstance(ref, dict):
            if not isinstance(val, dict):
                raise SpecError(f"{where} must be a table")
            out[key] = _merge(ref, val, where)
            continue
        out[key] = _coerce(ref, val, where)
    return out


def _coerce(ref, val, where):
    if isinstance(ref, bool):
        if not isinstance(val, bool):
            raise SpecError(f"{where} must be true or false")
        return val
    if isinstance(ref, int) and not isinstance(ref, bool):
        if isinstance(val, bool) or not isinstance(val, int):
            raise SpecError(f"{where} must be an integer")
        return val
    if isinstance(ref, float):
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise SpecError(f"{where} must be a number")
        return float(val)
    if isinstance(ref, str):
        if not isinstance(val, str):
            raise SpecError(f"{where} must be a string")
        return val
    if isinstance(ref, list):
        if not isinstance(val, list) or not all(isinstance(v, (int, float)) and
                                                not isinstance(v, bool) for v in val):
            raise SpecError(f"{where} must be a list of numbers")
        return [float(v) for v in val]
    raise SpecError(f"cannot interpret {where}")


def resolve_spec(sub: str, spec_path: str | None, seed: int | None) -> dict:
    given = {}
    if spec_path:
        try:
            with open(spec_path, "rb") as fh:
                given = tomli.load(fh)
        except OSError as exc:
            raise SpecError(f"cannot read spec file: {exc}") from exc
        except tomli.TOMLDecodeError as exc:
            raise SpecError(f"malformed spec file: {exc}") from exc
    spec = _merge(DEFAULTS[sub], given, "")
    if seed is not None:
        if not 0 <= seed < 2**63:
            raise SpecError("--seed must be a non-negative 63-bit integer")
        for section in spec.values():
            if "seed" in section:
                section["seed"] = seed
    return spec


def _toml_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, list):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return repr(v)


def dump_toml(tree: dict) -> str:
    lines = []
    for section, body in tree.items():
        lines.append(f"[{section}]")
        for key, val in body.items():
            lines.append(f"{key} = {_toml_value(val)}")
        lines.append("")
    return "\n".join(lines)


# --- builders from spec ---------------------------------------------------

def build_code(c: dict, gamma: float, g: float) -> protocols.SensorCode:
    strategy_kw = {"kind": c["strategy"]}
    if c["strategy"] == "energy_gap":
        strategy_kw["gap"] = c["gap"]
    if c["strategy"] == "zeno":
        strategy_kw["zeno_interval"] = c["zeno_interval"]
    strategy = protocols.DephasingStrategy(**strategy_kw)
    name = c["name"]
    if name in ("example_i", "example_ii"):
        return protocols.build(name, g=g, gamma=gamma, strategy=strategy)
    if name == "xy":
        return protocols.build_xy_code(c["theta"], g, gamma, strategy)
    if name == "general":
        return protocols.build_general_signal_code(c["theta"], c["phi"], g, gamma, c["gap"])
    if name == "homodyne_z":
        return protocols.build_homodyne_z(c["b"], g, gamma, c["gap"])
    if name == "interferometer":
        return protocols.build_interferometer_code(c["g1"], c["g2"], gamma)
    raise SpecError(f"code.name: unknown code {name!r}; choose from {protocols.CODE_NAMES}")


def build_noise(n: dict) -> protocols.NoiseModel:
    return protocols.NoiseModel(**n)


# --- output ---------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    return format(float(x), ".17g")


def _header(sub: str, spec: dict) -> str:
    return (f"# jumpsense {sub} schema_version={SCHEMA_VERSION}\n"
            f"# spec: {json.dumps(spec, sort_keys=True)}\n")


def csv_text(sub: str, spec: dict, columns: dict) -> str:
    names = list(columns)
    cols = [np.asarray(columns[k]) for k in names]
    lines = [_header(sub, spec) + ",".join(names)]
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def json_text(sub: str, spec: dict, results) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "subcommand": sub, "spec": spec,
           "results": _jsonable(results)}
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- subcommands ----------------------------------------------------------

def _record_times(duration, interval):
    n = int(round(duration / interval))
    return tuple(float(x) for x in np.arange(n + 1) * interval)


def run_trajectory(spec, threads):
    r = spec["run"]
    noise = build_noise(spec["noise"])
    code = build_code(spec["code"], noise.gamma, r["g"])
    cfg = trajectory.TrajectoryConfig(
        code=code, noise=noise, g=r["g"], duration=r["duration"], dt=r["dt"],
        n_traj=r["n_traj"], seed=r["seed"],
        record_times=_record_times(r["duration"], r["record_interval"]),
        jumps_during_delay=r["jumps_during_delay"], delay_dark_counts=r["delay_dark_counts"],
        refocus_dead_time=r["refocus_dead_time"], readout_phase=r["readout_phase"])
    res = trajectory.ensemble_probability(cfg, threads=threads)
    cols = {"time": res.times, "p": res.p_initial, "stderr": res.stderr,
            "n_clicks_mean": res.n_clicks_mean}
    summary = {"n_traj": cfg.n_traj, "p_final": res.p_initial[-1],
               "clicks_per_time": res.n_clicks_mean[-1] / max(cfg.duration, 1e-300)}
    return cols, summary


def _master_cfg(spec):
    r = spec["run"]
    noise = build_noise(spec["noise"])
    code = build_code(spec["code"], noise.gamma, r["g"])
    every = max(1, int(round(r["record_interval"] / r["dt"])))
    return master.MasterConfig(code=code, noise=noise, g=r["g"], duration=r["duration"],
                               dt=r["dt"], variant=r["variant"], tau_ec=r["tau_ec"],
                               record_every=every, readout_phase=r["readout_phase"])


def run_master(spec, threads):
    cfg = _master_cfg(spec)
    res = master.integrate(cfg)
    cols = {"time": res.times, "p": res.p, "coherence_re": res.coherence.real,
            "coherence_im": res.coherence.imag}
    summary = {"max_trace_drift": res.max_trace_drift}
    if spec["run"]["fit"]:
        try:
            fit = estimate.fit_damped_cosine(res.times, res.p)
            summary["fit"] = fit.to_dict()
        except (ValueError, estimate.FitError) as exc:
            summary["fit"] = {"error": str(exc)}
    return cols, summary


def _delay_params(d):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", analytic.ValidityWarning)
        return analytic.DelayParams(tau=d["tau"], g=d["g"], gamma=d["gamma"])


def _fig2_columns(d):
    p = _delay_params(d)
    grid = np.linspace(d["t_min"], d["t_max"], d["n_points"])
    curves = analytic.fig2_curves(grid, p, n_samples=d["n_samples"], seed=d["seed"],
                                  weighted=d["weighted"])
    return p, curves


def run_analytic(spec, threads):
    d = spec["delay"]
    p, curves = _fig2_columns(d)
    lo, hi = analytic.validity_window(p)
    return curves, {"predicted": analytic.predicted_envelope(p), "validity_window": [lo, hi]}


def run_fig2(spec, threads):
    d = spec["delay"]
    p, curves = _fig2_columns(d)
    pred = analytic.predicted_envelope(p)
    report = {"predicted": pred, "validity_window": list(analytic.validity_window(p))}
    try:
        fit = estimate.fit_damped_cosine(curves["t"], curves["p_exact"],
                                         sigma=np.maximum(curves["p_exact_stderr"], 1e-6))
        report["fit"] = fit.to_dict()
        report["adjudication"] = adjudicate_frequency(fit, pred)
    except (ValueError, estimate.FitError) as exc:
        report["fit"] = {"error": str(exc)}
    return curves, report


def adjudicate_frequency(fit: estimate.FitResult, pred: dict) -> dict:
    """Compare the fitted phase rate m1/2 with the /6 and /3 predictions."""
    rate = fit.m1 / 2
    dev = {k: rate / pred[k] - 1 for k in ("frequency_sixth", "frequency_third")}
    chosen = min(dev, key=lambda k: abs(dev[k]))
    return {"fitted_rate": rate, "relative_deviation": dev, "chosen": chosen}


def _load_code_file(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SpecError(f"check.code_file: cannot read {path!r}: {exc}") from exc
    try:
        n = int(doc["n_qubits"])
        states = tuple(np.array([complex(re, im) for re, im in s]) for s in doc["states"])
    except (KeyError, TypeError, ValueError) as exc:
        raise SpecError(f"check.code_file: expected n_qubits and states [[re, im], ...]: {exc}") \
            from exc
    if len(states) != 2 or any(s.size != 2**n for s in states):
        raise SpecError("check.code_file: need two states of length 2**n_qubits")
    shift = float(doc.get("shift", 0.0))
    return n, states, klcheck.lowering_errors(n, shift)


def run_klcheck(spec, threads):
    c = spec["check"]
    if c["code_file"]:
        n, states, errors = _load_code_file(c["code_file"])
        signal = None
    else:
        code = build_code(spec["code"], 1.0, c["g"])
        n, states, errors = code.n_qubits, code.code_states, [j.op for j in code.jumps]
        signal = code.signal(1.0) - code.signal(0.0)
    full = klcheck.kl_full_check(states, [np.eye(2**n)] + list(errors), c["tol"])
    diag = klcheck.kl_diagonal_check(states, errors, c["tol"])
    report = klcheck.KLReport(full.full_ok, diag.diagonal_ok, full.violations + diag.violations,
                              klcheck.sensable_axes(states, n), c["tol"])
    out = {"kl": report.to_dict()}
    if signal is not None:
        out["signal_sensable"] = klcheck.sensable(states, signal, c["tol"])
    if c["n_random"] > 0:
        out["sigma_z_nogo"] = klcheck.sigma_z_nogo_scan(c["n_random"], seed=c["seed"],
                                                         tol=c["tol"]).to_dict()
    if c["homodyne_codes"] > 0:
        scan = klcheck.homodyne_blocked_scan(c["homodyne_b"], c["homodyne_codes"], c["seed"])
        expected = protocols.homodyne_blocked_axis(c["homodyne_b"])
        out["homodyne"] = {"blocked_axis": scan.blocked_axis, "expected_axis": expected,
                           "overlap": abs(float(scan.blocked_axis @ expected)),
                           "z_sensable": scan.z_sensable, "n_codes": scan.n_codes}
    return None, out


def table1_row(alpha, s):
    gamma, g = s["gamma"], s["g"]
    code = protocols.build_example_i(g, gamma)
    modes = master.slowest_modes(code, protocols.NoiseModel(gamma=gamma, loss_alpha=alpha), g, 8)
    osc = modes[np.abs(modes.imag) > 1e-12]
    lam = osc[0] if osc.size else modes[0]
    decay, freq = -lam.real, abs(lam.imag)
    row = {"alpha": alpha, "decay": decay / gamma, "frequency": freq / g,
           "small_alpha_law": 2 * alpha + 4 * alpha**2,
           "sensitivity_coeff": np.sqrt(decay / (4 * gamma)) / (freq / (2 * g))}
    # time-domain fit where the oscillation is resolved
    fcode = protocols.build_example_i(s["fit_g"], gamma)
    cfg = master.MasterConfig(fcode, protocols.NoiseModel(gamma=gamma, loss_alpha=alpha),
                              s["fit_g"], s["fit_duration"], dt=s["dt"],
                              record_every=max(1, int(round(0.1 / s["dt"]))))
    res = master.integrate(cfg)
    fit = estimate.fit_damped_cosine(res.times, res.p, envelope="exp")
    row["fit_at_fit_g"] = {"g": s["fit_g"], "m1_over_g": fit.m1 / s["fit_g"],
                           "m2_over_gamma": fit.m2 / gamma}
    return row


def run_table1(spec, threads):
    s = spec["sweep"]
    alphas = s["alphas"]
    for key in ("reference_decay", "reference_frequency", "reference_sensitivity"):
        if len(s[key]) != len(alphas):
            raise SpecError(f"sweep.{key} must have one entry per alpha")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows = list(pool.map(lambda a: table1_row(a, s), alphas))
    for k, row in enumerate(rows):
        row["reference_decay"] = s["reference_decay"][k]
        row["reference_frequency"] = s["reference_frequency"][k]
        row["reference_sensitivity"] = s["reference_sensitivity"][k]
        row["decay_rel_dev"] = row["decay"] / row["reference_decay"] - 1
        row["frequency_rel_dev"] = row["frequency"] / row["reference_frequency"] - 1
        a = row["alpha"]
        row["quadratic_frequency_law"] = 2 + 2 * a - 24 * a**2
    return None, {"rows": rows}


def run_sensitivity(spec, threads):
    s = spec["study"]
    gam = s["gamma"]
    perfect, slope_p = estimate.scaling_study(estimate.protected_curve(gam), s["g"], s["totals"],
                                              s["n_grid"])
    ramsey, slope_r = estimate.scaling_study(estimate.ramsey_curve(gam), s["g"], s["totals"],
                                             s["n_grid"], t_min=0.01 / gam)
    rows = []
    big_t = s["alpha_total"]
    for a in s["alphas"]:
        rep = estimate.sensitivity(estimate.protected_curve(gam, a), s["g_small"], big_t,
                                   np.linspace(big_t / s["n_grid"], big_t, s["n_grid"]))
        rows.append({"alpha": a, "kappa": 0.0, "tau": 0.0, "m1": 2 * s["g_small"],
                     "m2": 2 * gam * a, "delta_g": rep.delta_g, "optimal_t": rep.optimal_t,
                     "predicted": estimate.predicted_lossy_sensitivity(gam, a, big_t)})
    cols = {"T": [p[0] for p in perfect], "delta_g_perfect": [p[1] for p in perfect],
            "delta_g_ramsey": [p[1] for p in ramsey]}
    return cols, {"slope_perfect": slope_p, "slope_ramsey": slope_r, "lossy": rows}


RUNNERS = {
    "trajectory": run_trajectory,
    "master": run_master,
    "analytic": run_analytic,
    "klcheck": run_klcheck,
    "table1": run_table1,
    "fig2": run_fig2,
    "sensitivity": run_sensitivity,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="jumpsense", description=__doc__.splitlines()[0])
    ap.add_argument("subcommand", choices=sorted(RUNNERS))
    ap.add_argument("--spec", help="TOML experiment spec (keys as in --print-defaults)")
    ap.add_argument("--out", default="out", help="output directory (default: out)")
    ap.add_argument("--seed", type=int, help="override every seed in the spec")
    ap.add_argument("--threads", type=int, default=1, help="worker threads (default: 1)")
    ap.add_argument("--print-defaults", action="store_true",
                    help="print the default spec for the subcommand and exit")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    sub = args.subcommand
    if args.print_defaults:
        sys.stdout.write(dump_toml(DEFAULTS[sub]))
        return 0
    try:
        if args.threads < 1:
            raise SpecError("--threads must be >= 1")
        spec = resolve_spec(sub, args.spec, args.seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", analytic.ValidityWarning)
            cols, results = RUNNERS[sub](spec, args.threads)
    except (SpecError, ValueError, KeyError, TypeError) as exc:
        print(f"jumpsense {sub}: invalid configuration: {exc}", file=sys.stderr)
        return 1
    except NUMERIC_ERRORS as exc:
        print(f"jumpsense {sub}: numerical failure ({type(exc).__module__}): {exc}",
              file=sys.stderr)
        return 2
    outputs = {os.path.join(args.out, f"{sub}.json"): json_text(sub, spec, results)}
    if cols is not None:
        outputs[os.path.join(args.out, f"{sub}.csv")] = csv_text(sub, spec, cols)
    for path, text in outputs.items():
        write_atomic(path, text)
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
