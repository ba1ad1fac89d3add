"""Command-line front end.

    coevo scenario fig2 --t-max 1e4 --seed 42 --out runs/
    coevo simulate --model gompertz --theta 0.01 --t-max 50 --format csv,svg
    coevo verify --out checks/

Exit codes: 0 success, 1 simulation failure, 2 configuration error, 3 I/O error,
4 failed checks.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__, integrate, models as M, scenarios, verify
from .integrate import SimParams, Trajectory

EXIT_CONFIG, EXIT_IO, EXIT_VERIFY = 2, 3, 4
FORMATS = ("csv", "json", "svg")

# flag name -> (SimParams field, type, help)
_PARAM_FLAGS = {
    "theta": ("theta", float, "ecological temperature (dimensionless, >= 0)"),
    "gamma": ("gamma", float, "relaxation rate of the environment (1/time, >= 0)"),
    "lambda": ("lam", float, "population-environment coupling rate (1/time, > 0)"),
    "dt": ("dt", float, "time step (time, > 0, dt*gamma < 0.5)"),
    "t-max": ("t_max", float, "integration horizon (time, > 0)"),
    "seed": ("seed", int, "unsigned 64-bit seed of the noise generator"),
    "x0": ("x0", float, "initial population density (> 0)"),
    "y0": ("y0", float, "initial environment variable"),
    "record-stride": ("record_stride", int, "record every k-th step (>= 1)"),
    "scheme": ("scheme", str, "y-update: trapezoidal or euler"),
}
_MODEL_FLAGS = {
    "K": (float, "carrying capacity (dimensionless density, > 0)"),
    "model": (str, "growth model: logistic or gompertz"),
    "env": (str, "environment: gaussian, symmetric_bimodal or asymmetric_bimodal"),
    "m": (float, "symmetric bimodal well position squared (> 0)"),
    "D": (float, "asymmetric bimodal depth (> 0)"),
    "a": (float, "asymmetric bimodal detuning, 0 < a < 1"),
    "coupling": (str, "carrying-capacity coupling: fixed or heaviside"),
    "threshold": (float, "Heaviside coupling threshold on y"),
}
_OUTPUT_FLAGS = {
    "bins": (int, "histogram bins (default 50)"),
    "range": (str, "histogram range 'lo,hi' (default 0,4K)"),
    "out": (str, "output directory (default: current directory)"),
    "format": (str, "comma-separated subset of csv,json,svg (default: all)"),
}
_ALL = {**{k: (v[1], v[2]) for k, v in _PARAM_FLAGS.items()}, **_MODEL_FLAGS, **_OUTPUT_FLAGS}


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    scenario: str | None = None
    model: M.GrowthModel = field(default_factory=M.Logistic)
    env: M.EnvironmentModel = field(default_factory=M.Gaussian)
    rule: M.CouplingRule = field(default_factory=M.Fixed)
    params: SimParams = field(default_factory=SimParams)
    out: str = "."
    formats: tuple = FORMATS
    bins: int = 50
    range: tuple | None = None
    seed: int | None = None


# ---------------------------------------------------------------------------
# parsing


def _build_parser():
    parser = argparse.ArgumentParser(prog="coevo", description=__doc__.split("\n")[0],
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--version", action="version", version=f"coevo {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="UTF-8 file of 'key = value' lines; flags override it")
    base = SimParams()
    defaults = {flag: getattr(base, f) for flag, (f, _, _) in _PARAM_FLAGS.items()}
    defaults.update({"K": 1.0, "model": "logistic", "env": "gaussian", "m": 0.5, "D": 4.0,
                     "a": 0.25, "coupling": "fixed", "threshold": 0.0})
    for name, (typ, text) in _ALL.items():
        if name in defaults:
            text += f"; default {defaults[name]} (scenario: preset value)"
        common.add_argument(f"--{name}", type=typ, default=None, help=text)
    sub = parser.add_subparsers(dest="command", metavar="{simulate,scenario,verify}")
    sub.add_parser("simulate", parents=[common], help="run one stochastic trajectory")
    sc = sub.add_parser("scenario", parents=[common], help="run a named preset")
    sc.add_argument("name", help="preset: " + ", ".join(scenarios.PRESETS))
    sub.add_parser("verify", parents=[common], help="run the analytic verification checks")
    return parser


def _read_config(path):
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("_", "-")
        if key == "lam":
            key = "lambda"
        if key not in _ALL:
            raise ConfigError(f"unknown key '{key}' in config")
        typ = _ALL[key][0]
        try:
            out[key] = typ(float(value)) if typ is int and "e" in value.lower() else typ(value)
        except ValueError:
            raise ConfigError(f"'{key}': expected {typ.__name__}, got {value!r}") from None
    return out


def _env_from(values, base):
    kind = values.get("env")
    if kind is None:
        if any(k in values for k in ("m", "D", "a")):
            kind = base.kind
        else:
            return base
    kind = {"symmetric": "symmetric_bimodal", "asymmetric": "asymmetric_bimodal"}.get(kind, kind)
    prev = base.to_dict() if base.kind == kind else {}
    prev.pop("kind", None)
    keys = {"gaussian": (), "symmetric_bimodal": ("m",), "asymmetric_bimodal": ("D", "a")}
    if kind not in keys:
        raise ConfigError(f"'env': unknown environment {kind!r}")
    args = {k: values.get(k, prev.get(k)) for k in keys[kind]}
    args = {k: v for k, v in args.items() if v is not None}
    try:
        return M.from_dict({"kind": kind, **args})
    except ValueError as exc:
        raise ConfigError(f"'env': {exc}") from None


def parse_config(argv=None) -> RunConfig:
    """Turn argv (plus an optional config file) into a validated RunConfig.

    Raises ConfigError naming the offending key; argparse handles syntax
    errors itself (exit 2).
    """
    parser = _build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        parser.print_usage(sys.stderr)
        raise ConfigError("a command is required")
    ns = parser.parse_args(argv)
    if ns.command is None:
        raise ConfigError("a command is required")
    values = _read_config(ns.config) if ns.config else {}
    for name in _ALL:
        v = getattr(ns, name.replace("-", "_"))
        if v is not None:
            values[name] = v

    if ns.command == "scenario":
        try:
            spec = scenarios.preset(ns.name)
        except KeyError as exc:
            raise ConfigError(str(exc.args[0])) from None
        model, env, rule, params = spec.model, spec.env, spec.rule, spec.params
    else:
        model, env, rule, params = M.Logistic(1.0), M.Gaussian(), M.Fixed(), SimParams()

    if "model" in values or "K" in values:
        kind = values.get("model", model.kind)
        if kind not in ("logistic", "gompertz"):
            raise ConfigError(f"'model': unknown growth model {kind!r}")
        try:
            model = M.from_dict({"kind": kind, "K": values.get("K", model.K)})
        except ValueError as exc:
            raise ConfigError(f"'K': {exc}") from None
    env = _env_from(values, env)
    if "coupling" in values or "threshold" in values:
        kind = values.get("coupling", "heaviside" if isinstance(rule, M.HeavisideShift) else "fixed")
        if kind == "fixed":
            rule = M.Fixed()
        elif kind == "heaviside":
            rule = M.HeavisideShift(values.get("threshold", getattr(rule, "threshold", 0.0)))
        else:
            raise ConfigError(f"'coupling': unknown rule {kind!r}")

    overrides = {field_: values[flag] for flag, (field_, _, _) in _PARAM_FLAGS.items() if flag in values}
    try:
        params = replace(params, **overrides)
    except ValueError as exc:
        key = str(exc).split(":", 1)[0]
        flag = next((f for f, spec_ in _PARAM_FLAGS.items() if spec_[0] == key), key)
        raise ConfigError(f"invalid value for '{flag}': {str(exc).split(':', 1)[1].strip()}") from None

    formats = FORMATS
    if "format" in values:
        formats = tuple(s.strip() for s in values["format"].split(",") if s.strip())
        bad = [f for f in formats if f not in FORMATS]
        if bad or not formats:
            raise ConfigError(f"'format': unsupported {bad or values['format']!r}; choose from {FORMATS}")
    bins = values.get("bins", 50)
    if bins < 1:
        raise ConfigError("'bins': must be >= 1")
    rng = None
    if "range" in values:
        try:
            lo, hi = (float(s) for s in values["range"].split(","))
        except ValueError:
            raise ConfigError(f"'range': expected 'lo,hi', got {values['range']!r}") from None
        if not hi > lo:
            raise ConfigError("'range': hi must exceed lo")
        rng = (lo, hi)
    return RunConfig(command=ns.command, scenario=getattr(ns, "name", None), model=model, env=env,
                     rule=rule, params=params, out=values.get("out", "."), formats=formats,
                     bins=bins, range=rng, seed=values.get("seed"))


# ---------------------------------------------------------------------------
# output


def _write_csv(path, header, columns):
    rows = zip(*(np.asarray(c, dtype=float).tolist() for c in columns))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)   # csv uses repr(): shortest round-trip decimal


def read_csv(path):
    """Columns of a CSV written by :func:`emit`, keyed by header name."""
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return {name: np.array([float(r[i]) for r in rows[1:]]) for i, name in enumerate(rows[0])}


def _points(ts, vals, lo, hi, x0, y0, w, h):
    ts, v = np.asarray(ts, dtype=float), np.asarray(vals, dtype=float)
    if ts.size > 2000:
        idx = np.linspace(0, ts.size - 1, 2000).astype(int)
        ts, v = ts[idx], v[idx]
    span = (ts[-1] - ts[0]) or 1.0
    px = x0 + (ts - ts[0]) / span * w
    py = y0 + h - (v - lo) / (hi - lo) * h
    return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))


def _svg(path, traj, comparison=None, title=""):
    """Static line plot: x(t) on top (with the comparison curve), y(t) below."""
    W, H, pad = 800, 260, 50
    pw, ph = W - 2 * pad, H - 60
    panels = [("x", traj.xs)] + ([("y", traj.ys)] if traj.ys is not None else [])
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{len(panels) * H}">',
           f'<text x="{pad}" y="20" font-size="14">{title}</text>']
    for k, (label, vals) in enumerate(panels):
        top = k * H + 30
        curves = [(traj.times, vals, "#1f4fbf")]
        if comparison is not None and label == "x":
            curves.append((comparison.times, comparison.xs, "#c0392b"))
        lo = min(float(np.min(c[1])) for c in curves)
        hi = max(float(np.max(c[1])) for c in curves)
        if hi <= lo:
            lo, hi = lo - 0.5, hi + 0.5
        out.append(f'<rect x="{pad}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#888"/>')
        out.append(f'<text x="5" y="{top + 12}" font-size="12">{label}</text>')
        out.append(f'<text x="5" y="{top + 26}" font-size="10">{hi:.3g}</text>')
        out.append(f'<text x="5" y="{top + ph}" font-size="10">{lo:.3g}</text>')
        for ts, vs, colour in curves:
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1" '
                       f'points="{_points(ts, vs, lo, hi, pad, top, pw, ph)}"/>')
    out.append(f'<text x="{W // 2}" y="{len(panels) * H - 8}" font-size="12">t</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")


def _traj_json(traj):
    d = {"times": traj.times.tolist(), "xs": traj.xs.tolist()}
    if traj.ys is not None:
        d["ys"] = traj.ys.tolist()
    d["metadata"] = traj.metadata()
    return d


def emit(result, formats, directory, name=None):
    """Write a Trajectory or ScenarioReport; returns the list of written paths."""
    os.makedirs(directory, exist_ok=True)
    written = []

    def path(suffix):
        p = os.path.join(directory, name + suffix)
        written.append(p)
        return p

    if isinstance(result, Trajectory):
        name = name or "trajectory"
        trajs, comparison, density, meta = [result], None, None, {}
    else:
        name = name or result.spec.name
        trajs, comparison, density = result.trajectories, result.comparison, result.density
        meta = {"scenario": result.spec.to_dict(), "summary": result.summary,
                "transitions": result.transitions,
                "window_means": [w.tolist() for w in result.window_means]}

    if "csv" in formats:
        for i, tr in enumerate(trajs):
            suffix = ".csv" if i == 0 else f"_run{i}.csv"
            _write_csv(path(suffix), ["t", "x", "y"], [tr.times, tr.xs, tr.ys])
        if comparison is not None:
            _write_csv(path("_comparison.csv"), ["t", "x"], [comparison.times, comparison.xs])
        if density is not None:
            e = density.histogram.edges
            _write_csv(path("_histogram.csv"), ["bin_lo", "bin_hi", "empirical", "theoretical"],
                       [e[:-1], e[1:], density.histogram.densities, density.theoretical])
    if "json" in formats:
        doc = {"version": __version__, **meta, "trajectories": [_traj_json(t) for t in trajs]}
        if comparison is not None:
            doc["comparison"] = _traj_json(comparison)
        if density is not None:
            h = density.histogram
            doc["histogram"] = {"bin_lo": h.edges[:-1].tolist(), "bin_hi": h.edges[1:].tolist(),
                                "empirical": h.densities.tolist(),
                                "theoretical": density.theoretical.tolist(),
                                "n_samples": h.n_samples, "n_outside": h.n_outside,
                                "l1_distance": density.l1_distance,
                                "ks_distance": density.ks_distance}
        with open(path(".json"), "w", encoding="utf-8") as fh:
            json.dump(doc, fh)
    if "svg" in formats:
        _svg(path(".svg"), trajs[0], comparison, title=name)
    return written


# ---------------------------------------------------------------------------
# verification suite


def run_checks():
    """Fast analytic checks; returns a list of (name, value, threshold, passed)."""
    grid = (np.linspace(0.05, 4.0, 101), np.linspace(-3.0, 3.0, 101))
    rows = []
    for model in (M.Logistic(1.0), M.Gompertz(1.0)):
        for env in (M.Gaussian(), M.SymmetricBimodal(0.5), M.AsymmetricBimodal(4.0, 0.25)):
            v = verify.fp_residual(model, 0.5, 1.0, 50.0, grid, env=env)
            rows.append((f"fp_residual/{model.kind}/{env.kind}", v, 1e-10, v < 1e-10))
    v = verify.fp_residual(M.Logistic(1.0), 0.5, 1.0, 50.0, grid, tilt=0.1)
    rows.append(("fp_residual/negative_control", v, 1e-3, v > 1e-3))
    lg = M.Logistic(1.0)
    for th in (0.1, 0.5, 1.0):
        v = abs(verify.zero_mean_quadrature(lambda x: M.theta_population(lg, x, th), lg, th))
        rows.append((f"zero_mean/theta_population/theta={th}", v, 1e-8, v < 1e-8))
        for n in range(1, 5):
            v = abs(verify.zero_mean_quadrature(lambda y: M.hermite(n, y, th), M.Gaussian(), th))
            rows.append((f"zero_mean/He{n}/theta={th}", v, 1e-8, v < 1e-8))
    v = verify.conservation_check(lg, M.Gaussian(), 0.1, 1.0, 0.5, 0.0, 1e-3, 100.0)
    rows.append(("conservation/rk4", v, 1e-8, v < 1e-8))
    det = integrate.simulate_deterministic(lg, 1.0, 1.0, 0.01, 1e-3, 20.0)
    v = float(np.max(np.abs(det.xs - integrate.logistic_closed_form(0.01, 1.0, 1.0, det.times))))
    rows.append(("rk4_vs_closed_form", v, 1e-8, v < 1e-8))
    return rows


# ---------------------------------------------------------------------------


def main(argv=None):
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"coevo: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:          # argparse: --help (0) or syntax error (2)
        return exc.code if isinstance(exc.code, int) else EXIT_CONFIG
    try:
        if cfg.command == "verify":
            rows = run_checks()
            for name, value, thr, ok in rows:
                print(f"{'PASS' if ok else 'FAIL'}  {name}: {value:.3e} (threshold {thr:g})")
            if "json" in cfg.formats:
                os.makedirs(cfg.out, exist_ok=True)
                with open(os.path.join(cfg.out, "verify.json"), "w", encoding="utf-8") as fh:
                    json.dump([{"check": n, "value": v, "threshold": t, "passed": bool(ok)}
                               for n, v, t, ok in rows], fh, indent=1)
            if "csv" in cfg.formats:
                os.makedirs(cfg.out, exist_ok=True)
                with open(os.path.join(cfg.out, "verify.csv"), "w", newline="", encoding="utf-8") as fh:
                    w = csv.writer(fh, lineterminator="\n")
                    w.writerow(["check", "value", "threshold", "passed"])
                    w.writerows([n, repr(v), repr(t), int(ok)] for n, v, t, ok in rows)
            return 0 if all(r[3] for r in rows) else EXIT_VERIFY
        if cfg.command == "scenario":
            spec = scenarios.preset(cfg.scenario)
            spec = replace(spec, model=cfg.model, env=cfg.env, rule=cfg.rule, params=cfg.params)
            report = scenarios.run_scenario(spec)
            if spec.density and (cfg.bins != 50 or cfg.range is not None):
                report.density = verify.compare_density(report.trajectories[0].xs, spec.model,
                                                        spec.params.theta, cfg.bins, cfg.range)
                report.summary["l1_distance"] = report.density.l1_distance
                report.summary["ks_distance"] = report.density.ks_distance
            result, name = report, spec.name
            for key, val in report.summary.items():
                print(f"{key}: {val}")
        else:
            result = integrate.simulate(cfg.model, cfg.env, cfg.rule, cfg.params)
            name = "simulate"
        for p in emit(result, cfg.formats, cfg.out, name):
            print(p)
        return 0
    except integrate.SimulationError as exc:
        print(f"coevo: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"coevo: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"coevo: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
