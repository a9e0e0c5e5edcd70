"""Command-line front end: ``gaussys <command> --input CONFIG.json``.

Exit status: 0 on success or a passing verdict, 1 on a failing verdict
(``fail``, ``not_stationary``, pairs not equal in law), 2 on usage or config
errors, 3 on numerical failure (overflow, quadrature, window cap).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from . import schemas
from .analytic import PairSpec, QuadratureError, bivariate_intensity, onedim_intensity
from .classify import DEFAULT_TOL, FamilyLabel, classify_pair, equal_in_law_analytic
from .sampler import SimulationConfig, WindowError, simulate_system, write_samples_csv
from .verify import Design, default_design, equal_in_law_mc, estimate_intensity, stationarity_test

COMMANDS = ("simulate", "intensity", "classify", "canonicalize", "verify-stationarity", "equal-in-law")
EXIT_OK, EXIT_VERDICT, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


def bundled_configs() -> dict:
    """Name -> path of the example configs shipped with the package."""
    root = resources.files("gaussys") / "configs"
    return {p.name[:-5]: p for p in sorted(root.iterdir(), key=lambda p: p.name) if p.name.endswith(".json")}


def load_config(path: str) -> dict:
    """Read and schema-check a JSON config; ``example:NAME`` loads a bundled one."""
    if path.startswith("example:"):
        name = path.split(":", 1)[1]
        table = bundled_configs()
        if name not in table:
            raise ConfigError(f"no bundled example {name!r}; available: {', '.join(table)}")
        text = table[name].read_text()
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    try:
        jsonschema.validate(obj, schemas.CONFIG)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: config error at {where}: {exc.message}") from None
    return obj


def _need(cfg: dict, key: str, command: str):
    if key not in cfg:
        raise ConfigError(f"{command} needs '{key}' in the config")
    return cfg[key]


def _pair(cfg: dict, key: str, command: str) -> PairSpec:
    return PairSpec.from_json(_need(cfg, key, command))


def _design(cfg: dict) -> Design:
    return Design.from_json(cfg["design"]) if "design" in cfg else default_design()


def _settings(cfg: dict, args) -> dict:
    """Flags override config values."""
    return {
        "replicates": args.replicates if args.replicates is not None else cfg.get("replicates", 10_000),
        "seed": args.seed if args.seed is not None else cfg.get("seed", 0),
        "alpha": args.alpha if args.alpha is not None else cfg.get("alpha", 0.01),
        "tolerance": args.tolerance if args.tolerance is not None else cfg.get("tolerance", DEFAULT_TOL),
        "method": cfg.get("method", "targeted"),
        "workers": args.workers if args.workers is not None else cfg.get("workers", 1),
        "epsilon": cfg.get("epsilon"),
    }


# -- commands ------------------------------------------------------------------
# each returns (exit status, json object, text rendering, csv rows or None)


def cmd_simulate(cfg, s, fmt):
    pair = _pair(cfg, "pair", "simulate")
    times = _need(cfg, "times", "simulate")
    boxes = cfg.get("boxes", [None] * len(times))
    sim = SimulationConfig(
        pair, times, boxes, s["replicates"], seed=s["seed"],
        window_padding=cfg.get("window_padding"), epsilon=s["epsilon"], method=cfg.get("method", "window"),
    )
    samples = simulate_system(sim, workers=s["workers"])
    if fmt == "csv":
        return EXIT_OK, None, None, write_samples_csv(samples)
    samples = list(samples)
    obj = {
        "times": sim.times[:, 0].tolist() if pair.dim == 1 else sim.times.tolist(),
        "samples": [
            {
                "replicate": x.replicate,
                "window": [_num(x.window[0]), _num(x.window[1])],
                "truncation_error_bound": x.truncation_error_bound,
                "start_points": x.start_points.tolist(),
                "path_values": x.path_values.tolist(),
            }
            for x in samples
        ],
    }
    n = sum(x.n_particles for x in samples)
    text = (
        f"{len(samples)} replicates, {n} particles ({n / len(samples):.3f} per replicate)\n"
        f"window: [{samples[0].window[0]:g}, {samples[0].window[1]:g}], "
        f"truncation bound {samples[0].truncation_error_bound:.3g}\n"
    )
    return EXIT_OK, obj, text, None


def _num(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def cmd_intensity(cfg, s, fmt, replicates_given):
    pair = _pair(cfg, "pair", "intensity")
    times = _need(cfg, "times", "intensity")
    box = _need(cfg, "box", "intensity")
    if len(box) != len(times):
        raise ConfigError("intensity: 'box' needs one interval per time")
    analytic = None
    if len(times) == 1:
        analytic = onedim_intensity(pair, times[0], *box[0])
    elif len(times) == 2 and pair.measure.is_exp_mixture:
        analytic = bivariate_intensity(pair, times[0], times[1], [tuple(b) for b in box])
    estimate = None
    if replicates_given or analytic is None:
        sim = SimulationConfig(pair, times, box, s["replicates"], seed=s["seed"], method=s["method"], epsilon=s["epsilon"])
        est = estimate_intensity(simulate_system(sim, workers=s["workers"]), times, box)
        estimate = {"mean_count": est.mean_count, "std_error": est.std_error, "replicates": est.replicates}
    obj = {"times": times, "box": box, "analytic": analytic, "estimate": estimate}
    text = f"times {times} box {box}\n  analytic: {'-' if analytic is None else f'{analytic:.10g}'}\n"
    if estimate:
        text += f"  estimate: {estimate['mean_count']:.6g} +- {estimate['std_error']:.3g} ({estimate['replicates']} replicates)\n"
    rows = [["analytic", "mean_count", "std_error", "replicates"],
            [analytic, *(estimate[k] for k in ("mean_count", "std_error", "replicates"))] if estimate else [analytic, "", "", ""]]
    return EXIT_OK, obj, text, _rows_to_csv(rows)


def cmd_classify(cfg, s, fmt):
    report = classify_pair(_pair(cfg, "pair", "classify"), tol=s["tolerance"])
    status = EXIT_VERDICT if report.label is FamilyLabel.NOT_STATIONARY else EXIT_OK
    rows = [["label", "check", "residual"]] + [[report.label.value, e["check"], e["residual"]] for e in report.evidence]
    return status, report.to_json(), report.to_text(), _rows_to_csv(rows)


def cmd_canonicalize(cfg, s, fmt):
    report = classify_pair(_pair(cfg, "pair", "canonicalize"), tol=s["tolerance"])
    if report.label not in (FamilyLabel.S2, FamilyLabel.S3):
        obj = {"label": report.label.value, "canonical": None}
        return EXIT_VERDICT, obj, f"{report.label.value}: no canonical pair (needs S2 or S3)\n", None
    canonical = report.canonical.to_json()
    obj = {"label": report.label.value, "canonical": canonical}
    text = f"{report.label.value} canonical pair:\n{json.dumps(canonical, indent=2)}\n"
    return EXIT_OK, obj, text, None


def cmd_verify(cfg, s, fmt):
    report = stationarity_test(
        _pair(cfg, "pair", "verify-stationarity"), _design(cfg), replicates=s["replicates"], alpha=s["alpha"],
        seed=s["seed"], method=s["method"], workers=s["workers"], epsilon=s["epsilon"],
    )
    status = EXIT_OK if report.passed else EXIT_VERDICT
    return status, report.to_json(), report.to_text(), _report_csv(report)


def cmd_equal(cfg, s, fmt):
    a, b = _pair(cfg, "pair_a", "equal-in-law"), _pair(cfg, "pair_b", "equal-in-law")
    mode = cfg.get("mode", "both")
    analytic = mc = None
    text = ""
    if mode in ("analytic", "both"):
        try:
            analytic = equal_in_law_analytic(a, b, tol=s["tolerance"])
        except ValueError as exc:
            if mode == "analytic":
                raise
            text += f"analytic test skipped: {exc}\n"
        else:
            text += f"analytic: {'equal' if analytic.equal else 'not equal'} ({analytic.reason})\n"
    if mode in ("mc", "both"):
        mc = equal_in_law_mc(
            a, b, _design(cfg), replicates=s["replicates"], alpha=s["alpha"], seed=s["seed"],
            method=s["method"], workers=s["workers"], epsilon=s["epsilon"],
        )
        text += mc.to_text()
    ok = (analytic is None or analytic.equal) and (mc is None or mc.passed)
    obj = {
        "verdict": "pass" if ok else "fail",
        "analytic": analytic.to_json() if analytic is not None else None,
        "mc": mc.to_json() if mc is not None else None,
    }
    text += f"verdict: {obj['verdict']}\n"
    return (EXIT_OK if ok else EXIT_VERDICT), obj, text, _report_csv(mc) if mc is not None else None


def _report_csv(report):
    head = ["times", "shift", "box", "est_a", "se_a", "est_b", "se_b", "analytic", "analytic_b", "z"]
    rows = [head]
    for c in report.to_json()["comparisons"]:
        rows.append([json.dumps(c["times"]), json.dumps(c["shift"]), json.dumps(c["box"])] + [c[k] for k in head[3:]])
    return _rows_to_csv(rows)


def _rows_to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()


# -- entry point ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gaussys", description="Gaussian particle systems: intensities, simulation, stationarity.")
    parser.add_argument("--list-examples", action="store_true", help="list bundled example configs and exit")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--input", required=True, metavar="PATH", help="JSON config (or example:NAME for a bundled one)")
        p.add_argument("--output", metavar="PATH", help="write the report here instead of stdout")
        p.add_argument("--format", choices=("json", "csv", "text"), default="json")
        p.add_argument("--seed", type=_seed)
        p.add_argument("--replicates", type=_positive_int)
        p.add_argument("--alpha", type=_unit_interval)
        p.add_argument("--tolerance", type=_positive_float)
        p.add_argument("--workers", type=_positive_int, help="threads for simulation (output does not depend on it)")
    return parser


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


def _seed(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("must be a 64-bit unsigned integer")
    return v


def _unit_interval(text):
    v = float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("must lie in (0, 1)")
    return v


def _positive_float(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be > 0")
    return v


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.list_examples:
        for name, path in bundled_configs().items():
            print(f"{name}\t{path}", file=stdout)
        return EXIT_OK
    if args.command is None:
        parser.print_usage(stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.input)
        s = _settings(cfg, args)
        fmt = args.format
        if args.command == "simulate":
            result = cmd_simulate(cfg, s, fmt)
        elif args.command == "intensity":
            result = cmd_intensity(cfg, s, fmt, args.replicates is not None or "replicates" in cfg)
        elif args.command == "classify":
            result = cmd_classify(cfg, s, fmt)
        elif args.command == "canonicalize":
            result = cmd_canonicalize(cfg, s, fmt)
        elif args.command == "verify-stationarity":
            result = cmd_verify(cfg, s, fmt)
        else:
            result = cmd_equal(cfg, s, fmt)
    except (OverflowError, QuadratureError, WindowError, FloatingPointError) as exc:
        print(f"gaussys: numerical failure: {exc}", file=stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"gaussys: {exc}", file=stderr)
        return EXIT_USAGE
    status, obj, text, rows = result
    if fmt == "json":
        if obj is None:
            print("gaussys: json output is not available for this command; use csv", file=stderr)
            return EXIT_USAGE
        out = json.dumps(obj, indent=2) + "\n"
    elif fmt == "csv":
        if rows is None:
            print(f"gaussys: csv output is not available for {args.command}", file=stderr)
            return EXIT_USAGE
        out = rows
    else:
        out = text
    if args.output:
        try:
            Path(args.output).write_text(out)
        except OSError as exc:
            print(f"gaussys: cannot write {args.output}: {exc.strerror or exc}", file=stderr)
            return EXIT_USAGE
    else:
        stdout.write(out)
    return status


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
