"""Command-line front end.

Subcommands:

``estimate``
    Run the volume estimator on one config and print per-intensity
    means, standard errors, and z-scores against the target volume.
``experiment <name>``
    Run one of the five studies and write ``records.csv``,
    ``summary.json``, and a PNG figure into the output directory.
``constants``
    Print the geometric constants table for one or more dimensions.
``check``
    Run the self-contained invariant suite; exit 2 on any failure.
``plotdata``
    Re-derive per-experiment x/y series from a records file as CSV,
    for external plotting tools.

Exit codes: 0 success, 1 validation or usage error, 2 failed check.
Config files are JSON and schema-validated before any computation;
unknown keys are rejected.  ``PD_APPROX_WORKERS`` supplies a worker
count when neither the flag nor the config does.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import jsonschema

from . import checks, constants, experiments, plots
from .experiments import ExperimentConfig, ExperimentReport
from .targets import make_target

__all__ = ["main", "load_config", "build_experiment_config", "CONFIG_SCHEMA"]


_TARGET_SCHEMAS = [
    {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "radius"],
        "properties": {
            "kind": {"const": "ball"},
            "radius": {"type": "number", "exclusiveMinimum": 0},
            "dim": {"type": "integer", "minimum": 2},
        },
    },
    {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "sides"],
        "properties": {
            "kind": {"const": "box"},
            "sides": {
                "type": "array",
                "minItems": 1,
                "items": {"type": "number", "exclusiveMinimum": 0},
            },
        },
    },
    {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "a", "b"],
        "properties": {
            "kind": {"const": "ellipse"},
            "a": {"type": "number", "exclusiveMinimum": 0},
            "b": {"type": "number", "exclusiveMinimum": 0},
        },
    },
    {
        "type": "object",
        "additionalProperties": False,
        "required": ["kind", "vertices"],
        "properties": {
            "kind": {"const": "convex-polygon"},
            "vertices": {
                "type": "array",
                "minItems": 3,
                "items": {
                    "type": "array",
                    "minItems": 2,
                    "maxItems": 2,
                    "items": {"type": "number"},
                },
            },
        },
    },
]

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["target", "t_grid", "replications"],
    "properties": {
        "target": {"oneOf": _TARGET_SCHEMAS},
        "t_grid": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "number", "exclusiveMinimum": 0},
        },
        "replications": {"type": "integer", "minimum": 1},
        "base_seed": {"type": "integer", "minimum": 0},
        "epsilon": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "samples_per_cell": {"type": "integer", "minimum": 1},
        "inside_samples": {"type": "integer", "minimum": 1},
        "workers": {"type": "integer", "minimum": 1},
        "out_dir": {"type": "string", "minLength": 1},
        "enforce_hypothesis": {"type": "boolean"},
    },
}


class ConfigError(Exception):
    """Raised when a config file fails to parse or validate."""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def load_config(path) -> dict:
    """Read and schema-validate a JSON config file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        lines = []
        for err in errors:
            where = "$" + "".join(
                f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
            )
            lines.append(f"  at {where}: {err.message}")
        raise ConfigError(f"{path} failed validation:\n" + "\n".join(lines))
    return doc


def _resolve_workers(args, doc: dict) -> int:
    if getattr(args, "workers", None) is not None:
        return args.workers
    if "workers" in doc:
        return doc["workers"]
    env = os.environ.get("PD_APPROX_WORKERS")
    if env is not None:
        try:
            value = int(env)
        except ValueError:
            raise ConfigError(f"PD_APPROX_WORKERS must be an integer, got {env!r}")
        if value < 1:
            raise ConfigError("PD_APPROX_WORKERS must be positive")
        return value
    return 1


def build_experiment_config(doc: dict, seed=None, workers=None) -> ExperimentConfig:
    """Turn a validated config document into an ExperimentConfig."""
    target_spec = dict(doc["target"])
    target = make_target(target_spec.pop("kind"), **target_spec)
    return ExperimentConfig(
        target=target,
        t_grid=tuple(doc["t_grid"]),
        replications=doc["replications"],
        base_seed=doc.get("base_seed", 0) if seed is None else seed,
        epsilon=doc.get("epsilon", 1e-6),
        samples_per_cell=doc.get("samples_per_cell", 64),
        inside_samples=doc.get("inside_samples", 1 << 16),
        workers=workers if workers is not None else 1,
    )


def _config_echo(doc: dict, config: ExperimentConfig) -> dict:
    """The fully resolved run parameters, echoed into summary.json.

    Feeding the echo back in as a config file reproduces the records
    byte for byte.
    """
    echo = {
        "target": doc["target"],
        "t_grid": list(config.t_grid),
        "replications": config.replications,
        "base_seed": config.base_seed,
        "epsilon": config.epsilon,
        "samples_per_cell": config.samples_per_cell,
        "inside_samples": config.inside_samples,
        "workers": config.workers,
    }
    if "enforce_hypothesis" in doc:
        echo["enforce_hypothesis"] = doc["enforce_hypothesis"]
    return echo


def _prepare(args):
    doc = load_config(args.config)
    workers = _resolve_workers(args, doc)
    config = build_experiment_config(doc, seed=args.seed, workers=workers)
    return doc, config


def _out_dir(args, doc: dict):
    out = args.out if args.out is not None else doc.get("out_dir")
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write_report(report: ExperimentReport, doc: dict, config: ExperimentConfig, out: Path):
    experiments.write_records(out / "records.csv", report.records)
    summary = {
        "experiment": report.experiment,
        "config": _config_echo(doc, config),
        "aggregates": report.aggregates,
    }
    experiments.write_summary(out / "summary.json", summary)
    plots.render_figure(report.experiment, report, out / f"{report.experiment}.png")


def _cmd_estimate(args) -> int:
    doc, config = _prepare(args)
    report = experiments.run_unbiasedness(config)
    target_volume = report.aggregates["target_volume"]
    print(f"target volume {target_volume!r}")
    for t in sorted(report.aggregates["per_t"]):
        row = report.aggregates["per_t"][t]
        print(
            f"t={t:g} volume={row['mean_volume']:.10g} "
            f"stderr={row['stderr']:.4g} z={row['z_score']:+.3f}"
        )
    out = _out_dir(args, doc)
    if out is not None:
        report = ExperimentReport("estimate", report.records, report.aggregates)
        _write_report(report, doc, config, out)
    return 0


_RUNNERS = {
    "unbiasedness": lambda config, doc: experiments.run_unbiasedness(config),
    "variance": lambda config, doc: experiments.run_variance_scaling(
        config, enforce_hypothesis=doc.get("enforce_hypothesis", True)
    ),
    "clt": lambda config, doc: experiments.run_clt(
        config, enforce_hypothesis=doc.get("enforce_hypothesis", True)
    ),
    "symdiff": lambda config, doc: experiments.run_symdiff_scaling(config),
    "rxtail": lambda config, doc: experiments.run_rx_tail(config),
}


def _cmd_experiment(args) -> int:
    doc, config = _prepare(args)
    report = _RUNNERS[args.name](config, doc)
    out = _out_dir(args, doc) or Path(".")
    out.mkdir(parents=True, exist_ok=True)
    _write_report(report, doc, config, out)
    print(f"wrote {out / 'records.csv'} ({len(report.records)} records)")
    print(f"wrote {out / 'summary.json'}")
    return 0


_CONSTANTS_HEADER = (
    "d,kappa,omega,s_dd1,s_dd2,s_dd2_identity_gap,c_lower,c_upper,c_voronoi"
)


def _constants_row(d: int) -> str:
    closed = (d + 1) / math.factorial(d - 1) * constants.kappa(d) ** (d + 1)
    gap = abs(constants.s_ddk(d, 2) - closed) / closed
    lo, hi = constants.c_d_bounds(d)
    cells = [
        str(d),
        repr(constants.kappa(d)),
        repr(constants.omega(d)),
        repr(constants.s_ddk(d, 1)),
        repr(constants.s_ddk(d, 2)),
        repr(gap),
        repr(lo),
        repr(hi),
        repr(constants.c_d_voronoi(d)),
    ]
    return ",".join(cells)


def _cmd_constants(args) -> int:
    dims = [args.d] if args.d is not None else [2, 3, 4, 5, 6]
    if any(d < 2 for d in dims):
        raise ConfigError("constants are tabulated for d >= 2")
    print(_CONSTANTS_HEADER)
    for d in dims:
        print(_constants_row(d))
    return 0


def _cmd_check(args) -> int:
    results = checks.run_all_checks()
    for res in results:
        print(f"{'PASS' if res.ok else 'FAIL'} {res.name}: {res.detail}")
    failed = sum(1 for res in results if not res.ok)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 2


def _series_rows(records):
    """Per-experiment (series, x, y, yerr) rows from raw records."""
    by_experiment = {}
    for rec in records:
        by_experiment.setdefault(rec.experiment, []).append(rec)
    rows = []
    for name in sorted(by_experiment):
        recs = by_experiment[name]
        by_t = {}
        for rec in recs:
            by_t.setdefault(rec.t, []).append(rec)
        d = recs[0].d
        for t in sorted(by_t):
            vols = [r.volume for r in by_t[t]]
            n = len(vols)
            mean = math.fsum(vols) / n
            if n > 1:
                var = math.fsum((v - mean) ** 2 for v in vols) / (n - 1)
                se = math.sqrt(var / n)
            else:
                var, se = 0.0, 0.0
            if name == "variance":
                rows.append((name, "volume_variance", t, var, ""))
            elif name == "clt":
                rows.append((name, "ks_distance", t,
                             experiments.kolmogorov_distance(vols), ""))
            elif name == "rx-tail":
                rows.append((name, "max_circumradius_mean", t, mean, se))
            else:
                rows.append((name, "volume_mean", t, mean, se))
            sd = [r.symdiff for r in by_t[t] if r.symdiff is not None]
            if sd:
                m = math.fsum(sd) / len(sd)
                if len(sd) > 1:
                    sv = math.fsum((v - m) ** 2 for v in sd) / (len(sd) - 1)
                    sse = math.sqrt(sv / len(sd))
                else:
                    sse = 0.0
                scale = t ** (1.0 / d)
                rows.append((name, "symdiff_mean", t, m, sse))
                rows.append((name, "t_scaled_symdiff", t, scale * m, scale * sse))
    return rows


def _cmd_plotdata(args) -> int:
    records = experiments.read_records(args.records)
    if not records:
        raise ConfigError(f"{args.records} holds no records")
    lines = ["experiment,series,x,y,yerr"]
    for name, series, x, y, yerr in _series_rows(records):
        err = repr(float(yerr)) if yerr != "" else ""
        lines.append(f"{name},{series},{float(x)!r},{float(y)!r},{err}")
    text = "\n".join(lines) + "\n"
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        path = out / "plotdata.csv"
        path.write_text(text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="delapprox", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--seed", type=int, default=None, help="override base_seed")
        p.add_argument("--workers", type=int, default=None, help="worker count")
        p.add_argument("--out", default=None, help="output directory")

    p_est = sub.add_parser("estimate", help="single volume-estimate run")
    add_run_flags(p_est)
    p_est.set_defaults(func=_cmd_estimate)

    p_exp = sub.add_parser("experiment", help="run one study end to end")
    p_exp.add_argument("name", choices=sorted(_RUNNERS))
    add_run_flags(p_exp)
    p_exp.set_defaults(func=_cmd_experiment)

    p_con = sub.add_parser("constants", help="print the constants table")
    p_con.add_argument("--d", type=int, default=None, help="single dimension")
    p_con.set_defaults(func=_cmd_constants)

    p_chk = sub.add_parser("check", help="run the invariant suite")
    p_chk.set_defaults(func=_cmd_check)

    p_pd = sub.add_parser("plotdata", help="emit x/y series from a records file")
    p_pd.add_argument("--records", required=True, help="records.csv path")
    p_pd.add_argument("--out", default=None, help="output directory (default stdout)")
    p_pd.set_defaults(func=_cmd_plotdata)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
