"""
Command-line driver: ``curvemetrics <subcommand> [options]``.

Subcommands
-----------
inner-dist A B    inner geodesic distance between two curve JSON files
outer-dist A B    outer geodesic distance
compare           inner/outer comparison experiment (JSON + CSV)
flow A B          optimal outer path from A to B, integrated as an ambient flow
demo1d [X ...]    1D discontinuity example, CSV of (x, value)

Exit codes: 0 converged, 2 valid but unconverged (or flagged pairs), 1 error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .compare import ExperimentSpec, bilipschitz_probe, run_comparison
from .core import Curve, MetricConfig
from .exceptions import ConfigError, CurveMetricsError
from .flows import FieldSequence, integrate_flow
from .inner import InnerMetric, inner_distance
from .kernel import SobolevKernel
from .outer import demo_sweep, outer_distance, outer_path_energy
from .paths import DistanceOptions

SCHEMA_VERSION = 1
EXIT_OK, EXIT_ERROR, EXIT_UNCONVERGED = 0, 1, 2


@dataclass
class RunConfig:
    """Validated contents of a ``--config`` JSON document."""

    metric: MetricConfig = field(default_factory=MetricConfig)
    optimizer: DistanceOptions = field(default_factory=DistanceOptions)
    experiment: dict = None
    flow_steps: int = 64
    demo1d: dict = field(default_factory=lambda: {"half_width": 3.0, "spacing": 1e-3, "sweep": []})
    out: str = None
    seed: int = 0
    workers: int = 1

    KEYS = {"schema_version", "metric", "optimizer", "experiment", "flow", "demo1d", "io",
            "seed", "workers"}

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        unknown = set(data) - cls.KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        version = data.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}; expected {SCHEMA_VERSION}")
        cfg = cls()
        if "metric" in data:
            cfg.metric = MetricConfig.from_dict(data["metric"])
        if "optimizer" in data:
            cfg.optimizer = DistanceOptions.from_dict(data["optimizer"])
        if "experiment" in data:
            if not isinstance(data["experiment"], dict):
                raise ConfigError("experiment must be an object")
            bad = {"metric", "optimizer", "seed"} & set(data["experiment"])
            if bad:
                raise ConfigError(f"experiment keys {sorted(bad)} belong at the top level")
            cfg.experiment = dict(data["experiment"])
        if "flow" in data:
            unknown = set(data["flow"]) - {"steps"}
            if unknown:
                raise ConfigError(f"unknown flow keys: {sorted(unknown)}")
            cfg.flow_steps = int(data["flow"].get("steps", cfg.flow_steps))
        if "demo1d" in data:
            unknown = set(data["demo1d"]) - {"half_width", "spacing", "sweep"}
            if unknown:
                raise ConfigError(f"unknown demo1d keys: {sorted(unknown)}")
            cfg.demo1d = {**cfg.demo1d, **data["demo1d"]}
        if "io" in data:
            unknown = set(data["io"]) - {"out"}
            if unknown:
                raise ConfigError(f"unknown io keys: {sorted(unknown)}")
            cfg.out = data["io"].get("out")
        if "seed" in data:
            cfg.seed = int(data["seed"])
        if "workers" in data:
            cfg.workers = int(data["workers"])
        if cfg.workers < 1:
            raise ConfigError("workers must be >= 1")
        return cfg

    @classmethod
    def load(cls, path):
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def experiment_spec(self):
        data = dict(self.experiment or {})
        spec = ExperimentSpec.from_dict(data)
        return replace(spec, metric=self.metric, seed=self.seed,
                       optimizer=replace(self.optimizer, keep_path=False))


def write_atomic(path, text):
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text, out):
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _load_pair(a, b):
    return Curve.load(a), Curve.load(b)


def cmd_inner_dist(cfg, a, b):
    c1, c2 = _load_pair(a, b)
    report = inner_distance(InnerMetric(cfg.metric), c1, c2, cfg.optimizer)
    _emit(report.to_json(), cfg.out)
    return EXIT_OK if report.converged else EXIT_UNCONVERGED


def cmd_outer_dist(cfg, a, b):
    c1, c2 = _load_pair(a, b)
    report = outer_distance(SobolevKernel.from_config(cfg.metric), c1, c2, cfg.optimizer)
    _emit(report.to_json(), cfg.out)
    return EXIT_OK if report.converged else EXIT_UNCONVERGED


def cmd_compare(cfg):
    spec = cfg.experiment_spec()
    report = run_comparison(spec, workers=cfg.workers)
    probe = bilipschitz_probe(spec)
    report.diagnostics["bilipschitz_probe"] = {
        "lower": probe.lower, "upper": probe.upper,
        "eigen_bounds": [float(x) for x in probe.eigen_bounds]}
    text = report.to_json(indent=2)
    if cfg.out:
        write_atomic(cfg.out, text)
        write_atomic(Path(cfg.out).with_suffix(".csv"), report.to_csv())
    else:
        sys.stdout.write(report.to_csv())
    return EXIT_OK if report.diagnostics["flagged"] == 0 else EXIT_UNCONVERGED


def cmd_flow(cfg, a, b):
    c1, c2 = _load_pair(a, b)
    k = SobolevKernel.from_config(cfg.metric)
    report = outer_distance(k, c1, c2, replace(cfg.optimizer, keep_path=True))
    mp = report.path
    result = outer_path_energy(k, mp)
    knots = (np.arange(mp.steps) + 0.5) / mp.steps
    fields = FieldSequence(mp.fields(k, result), knots if mp.steps > 1 else None)
    fr = integrate_flow(fields, c1.points, cfg.flow_steps)
    payload = fr.to_dict()
    payload.update(distance=report.value,
                   endpoint_gap=float(np.max(np.abs(fr.final - c2.points))),
                   final_curve=Curve(fr.final).to_dict())
    _emit(json.dumps(payload, sort_keys=True), cfg.out)
    return EXIT_OK if report.converged else EXIT_UNCONVERGED


def cmd_demo1d(cfg, sweep):
    xs = list(sweep) or list(cfg.demo1d.get("sweep", []))
    if not xs:
        raise ConfigError("demo1d needs a non-empty sweep of x values")
    rows = demo_sweep(xs, cfg.demo1d["half_width"], cfg.demo1d["spacing"])
    lines = ["x,x_node,value"] + [",".join(repr(v) for v in row) for row in rows]
    _emit("\n".join(lines) + "\n", cfg.out)
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration JSON")
    common.add_argument("--out", help="output file (stdout when omitted)")
    common.add_argument("--seed", type=int, help="random seed (overrides config)")
    common.add_argument("--workers", type=int, help="worker processes (overrides config)")

    parser = argparse.ArgumentParser(prog="curvemetrics", description=__doc__.split("\n")[1])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("inner-dist", "outer-dist", "flow"):
        p = sub.add_parser(name, parents=[common])
        p.add_argument("curve_a")
        p.add_argument("curve_b")
    sub.add_parser("compare", parents=[common])
    p = sub.add_parser("demo1d", parents=[common])
    p.add_argument("sweep", nargs="*", type=float, help="evaluation points x")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        if args.out:
            cfg.out = args.out
        if args.seed is not None:
            cfg.seed = args.seed
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("workers must be >= 1")
            cfg.workers = args.workers
        if args.command == "inner-dist":
            return cmd_inner_dist(cfg, args.curve_a, args.curve_b)
        if args.command == "outer-dist":
            return cmd_outer_dist(cfg, args.curve_a, args.curve_b)
        if args.command == "flow":
            return cmd_flow(cfg, args.curve_a, args.curve_b)
        if args.command == "compare":
            return cmd_compare(cfg)
        return cmd_demo1d(cfg, args.sweep)
    except (CurveMetricsError, ValueError, OSError, KeyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
