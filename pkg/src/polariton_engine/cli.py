"""Command-line front end: ``engine spectrum|cycle|trajectories|sweep --config FILE``.

The config is one JSON document. ``engine`` holds EngineConfig fields in
natural units; an optional ``physical`` block (cavity_ghz, T_f_kelvin,
g_mhz, kappa_khz, gamma_mhz) is converted to natural units and overrides
them. Each subcommand reads its own section. ``seed``, ``out`` and
``threads`` may sit at top level and are overridden by the flags.

Exit status: 0 success, 1 runtime/numerical failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
import warnings
from dataclasses import asdict, fields

import numpy as np

from .dynamics import MeasurementScheme
from .jaynes_cummings import rabi_frequency
from .otto_engine import (
    DEFAULT_BIN_WIDTH, EngineConfig, HierarchyWarning, analytic_work_multi, analytic_work_single,
    analytic_work_two_qubit, config_errors, flux_for_frequency, histogram_work, hierarchy_warnings,
    run_measured_stroke, simulate_cycle, thermal_photon_number,
)

SUBCOMMANDS = ("spectrum", "cycle", "trajectories", "sweep")
SWEEP_VARIABLES = ("n_bar", "delta_1", "delta_2", "lambda")
ENGINE_FIELDS = {f.name for f in fields(EngineConfig)}


class ConfigError(Exception):
    def __init__(self, errors):
        super().__init__("\n".join(errors))
        self.errors = list(errors)


def fmt(x) -> str:
    return f"{float(x):.12g}"


# ------------------------------------------------------------------ config

def physical_to_natural(phys: dict) -> dict:
    """Map lab units (GHz, MHz, kHz, K) onto natural units with omega_L = 1."""
    f_L = phys["cavity_ghz"] * 1e9
    out = {}
    if "T_f_kelvin" in phys:
        out["n_bar"] = thermal_photon_number(2 * math.pi * f_L, phys["T_f_kelvin"])
    for key, scale, name in (("g_mhz", 1e6, "g"), ("kappa_khz", 1e3, "kappa"), ("gamma_mhz", 1e6, "gamma")):
        if key in phys:
            out[name] = phys[key] * scale / f_L
    return out


def _engine_fields(raw: dict, errors: list) -> dict:
    eng = dict(raw.get("engine", {}))
    unknown = sorted(set(eng) - ENGINE_FIELDS)
    if unknown:
        errors.append(f"engine: unknown fields {unknown}")
        for k in unknown:
            eng.pop(k)
    if "tau" in eng:
        eng["tau"] = tuple(eng["tau"])
    phys = raw.get("physical")
    if phys is not None:
        allowed = {"cavity_ghz", "T_f_kelvin", "g_mhz", "kappa_khz", "gamma_mhz"}
        if "cavity_ghz" not in phys:
            errors.append("physical: cavity_ghz is required")
        elif set(phys) - allowed:
            errors.append(f"physical: unknown fields {sorted(set(phys) - allowed)}")
        elif phys["cavity_ghz"] <= 0 or phys.get("T_f_kelvin", 0) < 0:
            errors.append("physical: cavity_ghz must be positive and T_f_kelvin >= 0")
        else:
            eng.update(physical_to_natural(phys))
    return eng


def _build_engine(eng: dict, errors: list, label="engine"):
    probe = EngineConfig.__new__(EngineConfig)
    defaults = {f.name: f.default for f in fields(EngineConfig)}
    for k, v in {**defaults, **eng}.items():
        object.__setattr__(probe, k, v)
    try:
        errs = config_errors(probe)
    except (TypeError, ValueError) as exc:
        errs = [f"malformed value: {exc}"]
    if errs:
        errors.extend(f"{label}: {e}" for e in errs)
        return None
    return EngineConfig(**eng)


def _scheme(kind, lam, errors, label):
    try:
        return MeasurementScheme(kind, 0.0 if kind == "none" else lam)
    except ValueError as exc:
        errors.append(f"{label}: {exc}")
        return None


def load_config(path: str, subcommand: str, seed=None, out=None, threads=None) -> dict:
    """Parse and fully validate a run configuration; raise ConfigError listing every problem."""
    errors = []
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError([f"cannot read config {path}: {exc}"])
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    if "subcommand" in raw and raw["subcommand"] != subcommand:
        errors.append(f"config is for subcommand {raw['subcommand']!r}, not {subcommand!r}")

    run = {"raw": raw, "subcommand": subcommand}
    run["seed"] = int(seed if seed is not None else raw.get("seed", 0))
    run["out"] = out if out is not None else raw.get("out", subcommand)
    env_threads = os.environ.get("ENGINE_THREADS")
    run["threads"] = int(threads if threads is not None else raw.get("threads", env_threads or 1))
    if run["threads"] < 1:
        errors.append("threads must be >= 1")
    out_dir = os.path.dirname(os.path.abspath(run["out"]))
    if not os.path.isdir(out_dir) or not os.access(out_dir, os.W_OK):
        errors.append(f"output directory {out_dir} does not exist or is not writable")

    eng = _engine_fields(raw, errors)
    run["engine_fields"] = eng
    sec = raw.get(subcommand, {})
    run["section"] = sec

    if subcommand == "spectrum":
        n = sec.get("n_points", 601)
        if n < 1:
            errors.append("spectrum: detuning grid is empty")
        if sec.get("g", eng.get("g", 0.013)) < 0:
            errors.append("spectrum: g must be >= 0")
        if sec.get("delta_min", -0.3) > sec.get("delta_max", 0.3):
            errors.append("spectrum: delta_min > delta_max")
        run["engine"] = None
    else:
        run["engine"] = _build_engine(eng, errors)

    if subcommand == "trajectories":
        kind = sec.get("scheme", "dispersive")
        lams = sec.get("lambdas", [0.0])
        if not lams:
            errors.append("trajectories: lambdas is empty")
        run["schemes"] = [_scheme(kind, float(l), errors, "trajectories") for l in lams]
        _check_traj(sec, errors, "trajectories")
        if run["engine"] is not None:
            for s in run["schemes"]:
                if s is not None and run["engine"].dt_sse * s.lam >= 0.01:
                    errors.append(f"trajectories: dt_sse*lambda must be < 0.01 (lambda={s.lam})")
    elif subcommand == "sweep":
        var = sec.get("variable")
        grid = sec.get("grid", [])
        if var not in SWEEP_VARIABLES:
            errors.append(f"sweep: variable must be one of {SWEEP_VARIABLES}, got {var!r}")
        if not grid:
            errors.append("sweep: grid is empty")
        if run["engine"] is not None and var in SWEEP_VARIABLES and grid:
            for x in grid:
                if var == "lambda":
                    _scheme(sec.get("scheme", "dispersive"), float(x), errors, f"sweep lambda={x}")
                else:
                    _build_engine({**eng, var: float(x)}, errors, f"sweep {var}={x}")
        if var == "lambda":
            _check_traj(sec, errors, "sweep")
    if errors:
        raise ConfigError(errors)
    return run


def _check_traj(sec, errors, label):
    if sec.get("n_traj", 1000) < 1:
        errors.append(f"{label}: n_traj must be >= 1")
    if sec.get("bin_width", DEFAULT_BIN_WIDTH) <= 0:
        errors.append(f"{label}: bin_width must be positive")
    if sec.get("scheme", "dispersive") not in ("none", "dispersive", "absorptive"):
        errors.append(f"{label}: scheme must be none, dispersive or absorptive")


# ------------------------------------------------------------------ output

def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o)}")


def write_outputs(files: dict):
    """Write every file via temp file + rename, only after all computation succeeded."""
    for path, text in files.items():
        d = os.path.dirname(os.path.abspath(path))
        fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp_")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)


def _engine_echo(run):
    c = run["engine"]
    echo = {"natural_units": {k: v for k, v in asdict(c).items()}, "n_bar": c.resolved_n_bar}
    if "physical" in run["raw"]:
        echo["physical"] = run["raw"]["physical"]
    return echo


def _cycle_dict(res):
    return {"W_out": res.W_out, "W_in": res.W_in, "W_tot": res.W_tot,
            "stroke_energies": res.stroke_energies, "source": res.source}


# ------------------------------------------------------------- subcommands

def spectrum_rows(deltas, g, higher=True, two_qubit=True):
    """Dressed and bare energies vs detuning (omega_L = 1); g = 0 gives the bare crossings."""
    header = ["delta", "E_2_0", "E_1_0"]
    if higher:
        header += ["E_2_1", "E_1_1"]
    if two_qubit:
        header += ["E_phi_minus", "E_phi_plus"]
    header += ["bare_e_0", "bare_g_1"]
    if higher:
        header += ["bare_e_1", "bare_g_2"]
    rows = []
    for d in deltas:
        w = 1.0 + d
        row = [d]
        for n in ((0, 1) if higher else (0,)):
            om = rabi_frequency(d, g, n)
            row += [w + n - 0.5 * (om + d), (n + 1) + 0.5 * (om + d)]
        if two_qubit:
            om2 = math.sqrt(d * d + 8 * g * g)
            row += [0.5 * (w + 1 - om2), 0.5 * (w + 1 + om2)]
        row += [w, 1.0]
        if higher:
            row += [w + 1.0, 2.0]
        rows.append(row)
    return header, rows


def cmd_spectrum(run):
    sec = run["section"]
    g = float(sec.get("g", run["engine_fields"].get("g", 0.013)))
    deltas = np.linspace(sec.get("delta_min", -0.3), sec.get("delta_max", 0.3), int(sec.get("n_points", 601)))
    deltas = np.round(deltas, 12) + 0.0
    header, rows = spectrum_rows(deltas, g, sec.get("higher", True), sec.get("two_qubit", True))
    return {f"{run['out']}_spectrum.csv": csv_text(header, rows)}


def cmd_cycle(run):
    c = run["engine"]
    sec = run["section"]
    single, multi, two = analytic_work_single(c), analytic_work_multi(c), analytic_work_two_qubit(c)
    report = {
        "config": _engine_echo(run),
        "analytic_single": _cycle_dict(single),
        "analytic_multi": {**_cycle_dict(multi), "W_tot_closed_form": multi.diagnostics["W_tot_closed_form"]},
        "analytic_two_qubit": _cycle_dict(two),
        "p_n": c.field_distribution(),
        "hierarchy_warnings": hierarchy_warnings(c),
        "flux_program": _flux(c),
    }
    if sec.get("numeric", True):
        num = simulate_cycle(c)
        report["numeric"] = {**_cycle_dict(num), "field_populations": num.p_n, "diagnostics": num.diagnostics}
    return {f"{run['out']}_cycle.json": json_text(report)}


def _flux(c):
    w0 = c.transmon_omega_0
    try:
        return {"omega_0": w0, "phi_over_phi0_at_omega_1": flux_for_frequency(c.omega_1, w0),
                "phi_over_phi0_at_omega_2": flux_for_frequency(c.omega_2, w0)}
    except ValueError as exc:
        return {"omega_0": w0, "error": str(exc)}


def _lam_tag(lam):
    return f"lam{lam:g}"


def _ensemble_outputs(c, scheme, sec, seed, threads):
    n_traj = int(sec.get("n_traj", 1000))
    ens, excited = run_measured_stroke(c, scheme, n_traj, seed, threads)
    dist = histogram_work(ens.works, float(sec.get("bin_width", DEFAULT_BIN_WIDTH)))
    return ens, excited, dist


def cmd_trajectories(run):
    c, sec = run["engine"], run["section"]
    files, summary = {}, []
    multi = len(run["schemes"]) > 1
    for scheme in run["schemes"]:
        ens, excited, dist = _ensemble_outputs(c, scheme, sec, run["seed"], run["threads"])
        stem = f"{run['out']}_{_lam_tag(scheme.lam)}" if multi else run["out"]
        pops = ens.mean_populations
        rows = zip(ens.times, pops["2,0"], pops["1,0"], pops["e,0"], pops["g,1"])
        files[f"{stem}_populations.csv"] = csv_text(["time", "pop_2_0", "pop_1_0", "pop_e_0", "pop_g_1"], rows)
        probs = dist.probabilities
        files[f"{stem}_pw.csv"] = csv_text(
            ["bin_left", "bin_right", "count", "probability"],
            zip(dist.bin_edges[:-1], dist.bin_edges[1:], dist.counts.tolist(), probs),
        )
        summary.append({
            "scheme": scheme.kind, "lambda": scheme.lam, "n_traj": dist.n_trajectories,
            "mean_W": dist.mean, "variance_W": dist.variance, "excited_starts": int(excited.sum()),
            "mean_jumps": float(ens.jump_counts.mean()),
        })
    files[f"{run['out']}_summary.json"] = json_text({
        "seed": run["seed"], "config": _engine_echo(run), "trajectories": sec, "results": summary,
    })
    return files


def cmd_sweep(run):
    c, sec = run["engine"], run["section"]
    var, grid = sec["variable"], [float(x) for x in sec["grid"]]
    numeric = bool(sec.get("numeric", False))
    rows = []
    if var == "lambda":
        header = ["lambda", "mean_W", "variance_W", "n_traj", "W_analytic_single"]
        w_single = analytic_work_single(c).W_tot
        for lam in grid:
            scheme = MeasurementScheme(sec.get("scheme", "dispersive"), lam)
            _, _, dist = _ensemble_outputs(c, scheme, sec, run["seed"], run["threads"])
            rows.append([lam, dist.mean, dist.variance, dist.n_trajectories, w_single])
    else:
        header = [var, "p1", "W_single", "W_multi_out", "W_multi_in", "W_multi_tot", "W_two_qubit"]
        if numeric:
            header.append("W_numeric_tot")
        for x in grid:
            cx = EngineConfig(**{**run["engine_fields"], var: x})
            multi = analytic_work_multi(cx)
            row = [x, float(cx.field_distribution()[1]), analytic_work_single(cx).W_tot,
                   multi.W_out, multi.W_in, multi.W_tot, analytic_work_two_qubit(cx).W_tot]
            if numeric:
                row.append(simulate_cycle(cx).W_tot)
            rows.append(row)
    return {f"{run['out']}_sweep.csv": csv_text(header, rows)}


COMMANDS = {"spectrum": cmd_spectrum, "cycle": cmd_cycle, "trajectories": cmd_trajectories, "sweep": cmd_sweep}


def build_parser():
    ap = argparse.ArgumentParser(prog="engine", description="Polaritonic qubit-photon Otto engine simulator")
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--out", default=None, help="output path prefix")
    ap.add_argument("--threads", type=int, default=None, help="trajectory workers (default: $ENGINE_THREADS or 1)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        run = load_config(args.config, args.subcommand, args.seed, args.out, args.threads)
    except ConfigError as exc:
        print("configuration error(s):", file=sys.stderr)
        for e in exc.errors:
            print(f"  - {e}", file=sys.stderr)
        return 2
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", HierarchyWarning)
            files = COMMANDS[args.subcommand](run)
        write_outputs(files)
    except (FloatingPointError, ValueError, np.linalg.LinAlgError, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1
    for path in files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
