"""Command line entry point: verification suites, index runs, Callias checks.

Config files are strict JSON with a version field::

    {
      "schema": 1,
      "operator": {"kind": "circle_dirac", "data": {"N": 8, "shift": -0.5}},
      "suites": ["calculus", "czech", "bc", "cylinder", "callias", "fredholm"],
      "grid": {"N": 8, "nt": 64, "T": 1.0, "L": 1.0},
      "tolerances": {"exact": 1e-12, "principal_angle": 1e-8},
      "epsilon": 1.0,
      "seed": 0,
      "out_dir": "reports",
      "mutation": null
    }

Unknown fields are rejected rather than ignored.  Every report embeds the
config hash, the seed, epsilon, the tolerances and the truncation sizes, and
identical config plus seed produces byte-identical output.  Suites run in
parallel, one output file each; the coordinator writes the summary last.

Exit codes: 0 all checks passed, 1 at least one check failed, 2 malformed
config or arguments.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import os
import sys as _sys
from dataclasses import dataclass, field

import numpy as np

from . import dirac, storage, suites

ENV_OUT = "HALFCYL_OUT"
KNOWN_SUITES = ("calculus", "czech", "bc", "cylinder", "callias", "fredholm")

_CONFIG_FIELDS = {"schema", "operator", "suites", "grid", "tolerances",
                  "epsilon", "seed", "out_dir", "mutation"}
_GRID_FIELDS = {"N", "nt", "T", "L"}

DEFAULT_TOLERANCES = {"exact": 1e-12, "principal_angle": 1e-8}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    operator: dict
    suites: list
    grid: dict = field(default_factory=lambda: {"N": 8, "nt": 64, "T": 1.0, "L": 1.0})
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    epsilon: float = 1.0
    seed: int = 0
    out_dir: str | None = None
    mutation: str | None = None

    def digest(self) -> str:
        doc = {
            "operator": self.operator, "suites": self.suites, "grid": self.grid,
            "tolerances": self.tolerances, "epsilon": self.epsilon,
            "seed": self.seed, "mutation": self.mutation,
        }
        return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:16]


def load_config(path) -> RunConfig:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if doc.get("schema") != 1:
        raise ConfigError(f"unsupported schema {doc.get('schema')!r}; expected 1")
    unknown = set(doc) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config fields {sorted(unknown)}")
    if "operator" not in doc:
        raise ConfigError("config requires an operator")
    grid = doc.get("grid", {"N": 8, "nt": 64, "T": 1.0, "L": 1.0})
    bad_grid = set(grid) - _GRID_FIELDS
    if bad_grid:
        raise ConfigError(f"unknown grid fields {sorted(bad_grid)}")
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(doc.get("tolerances", {}))
    if any(v <= 0 for v in tol.values()):
        raise ConfigError("tolerances must be positive")
    chosen = doc.get("suites", list(KNOWN_SUITES))
    bad = set(chosen) - set(KNOWN_SUITES)
    if bad:
        raise ConfigError(f"unknown suites {sorted(bad)}")
    mutation = doc.get("mutation")
    if mutation is not None and mutation not in suites.MUTATIONS:
        raise ConfigError(f"unknown mutation {mutation!r}")
    return RunConfig(
        operator=doc["operator"],
        suites=chosen,
        grid=grid,
        tolerances=tol,
        epsilon=float(doc.get("epsilon", 1.0)),
        seed=int(doc.get("seed", 0)),
        out_dir=doc.get("out_dir"),
        mutation=mutation,
    )


def _suite_rng(seed: int, name: str) -> np.random.Generator:
    tag = int.from_bytes(hashlib.sha256(name.encode()).digest()[:4], "big")
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


def _refine_builder(operator_doc: dict):
    if operator_doc.get("kind") != "circle_dirac":
        return None
    data = operator_doc.get("data", {})

    def build(factor: int):
        return dirac.circle_dirac(dirac.CircleDiracSpec(
            int(data["N"]) * factor, float(data.get("shift", 0.0)),
            data.get("potential")))

    return build


def _run_one(name: str, config: RunConfig):
    rng = _suite_rng(config.seed, name)
    sys_op = storage.operator_from_json(config.operator)
    if name == "calculus":
        return suites.calculus_suite(sys_op, rng, config.epsilon, config.tolerances,
                                     config.mutation)
    if name == "czech":
        return suites.czech_suite(sys_op, rng, config.epsilon, config.tolerances,
                                  config.mutation)
    if name == "bc":
        return suites.bc_suite(sys_op, rng, config.epsilon, config.tolerances,
                               config.mutation, refine_builder=_refine_builder(config.operator))
    if name == "cylinder":
        return suites.cylinder_suite(sys_op, rng, config.epsilon, config.tolerances,
                                     config.mutation, nt=int(config.grid.get("nt", 64)),
                                     T=float(config.grid.get("T", 1.0)))
    if name == "callias":
        return suites.callias_suite(rng, config.tolerances, config.mutation)
    if name == "fredholm":
        return suites.fredholm_suite(rng, config.tolerances, config.mutation)
    raise ValueError(f"unknown suite {name}")


def run_suite(config: RunConfig, out_dir=None) -> int:
    """Execute the selected suites; returns the process exit code."""
    out = out_dir or config.out_dir or os.environ.get(ENV_OUT, "reports")
    os.makedirs(out, exist_ok=True)
    stamp = {
        "config_hash": config.digest(),
        "seed": config.seed,
        "epsilon": config.epsilon,
        "tolerances": config.tolerances,
        "grid": config.grid,
        "mutation": config.mutation,
        "schema": 1,
    }
    results = {}
    with concurrent.futures.ThreadPoolExecutor(max_workers=len(config.suites)) as pool:
        futures = {pool.submit(_run_one, name, config): name for name in config.suites}
        for fut in concurrent.futures.as_completed(futures):
            name = futures[fut]
            try:
                doc = fut.result()
            except Exception as exc:  # a crashed suite is a failed suite
                doc = {"suite": name, "checks": [
                    {"name": "suite_exception", "passed": False, "error": repr(exc)}],
                    "plot_data": {}}
            doc.update(stamp)
            results[name] = doc
            storage.dump_json(doc, os.path.join(out, f"{name}.json"))
    passed = sum(sum(1 for c in results[n]["checks"] if c["passed"]) for n in results)
    failed = sum(sum(1 for c in results[n]["checks"] if not c["passed"]) for n in results)
    summary = dict(stamp)
    summary.update({
        "suites": sorted(results),
        "passed": passed,
        "failed": failed,
        "failed_checks": sorted(
            f"{n}:{c['name']}" for n in results for c in results[n]["checks"]
            if not c["passed"]),
    })
    if "fredholm" in results:
        for check in results["fredholm"]["checks"]:
            rep = check.get("report")
            if rep is not None:
                summary["index"] = rep.get("index")
                summary["oracle_index"] = rep.get("oracle_index")
    storage.dump_json(summary, os.path.join(out, "summary.json"))
    return 0 if failed == 0 else 1


PLOT_KINDS = {
    "rellich": ("rellich", ["j", "sval"]),
    "h1": ("h1", ["rank", "sval"]),
    "constants": ("constants_vs_Tc", ["T_c", "extension_constant"]),
    "callias_margin": ("callias_margin", ["x", "margin"]),
}


def emit_plot_data(report: dict, kind: str) -> str:
    """CSV table for one plot kind from a suite report."""
    if kind not in PLOT_KINDS:
        raise ConfigError(f"unknown plot kind {kind!r}; choose from {sorted(PLOT_KINDS)}")
    key, columns = PLOT_KINDS[kind]
    rows = report.get("plot_data", {}).get(key, [])
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(repr(float(row[c])) for c in columns))
    return "\n".join(lines) + "\n"


def _cmd_verify(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    if args.suites:
        bad = set(args.suites) - set(KNOWN_SUITES)
        if bad:
            print(f"unknown suites {sorted(bad)}", file=_sys.stderr)
            return 2
        config.suites = list(args.suites)
    if args.seed is not None:
        config.seed = args.seed
    if args.mutate:
        if args.mutate not in suites.MUTATIONS:
            print(f"unknown mutation {args.mutate}", file=_sys.stderr)
            return 2
        config.mutation = args.mutate
    return run_suite(config, out_dir=args.out)


def _cmd_index(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    config.suites = ["fredholm"]
    rc = run_suite(config, out_dir=args.out)
    out = args.out or config.out_dir or os.environ.get(ENV_OUT, "reports")
    with open(os.path.join(out, "fredholm.json")) as fh:
        doc = json.load(fh)
    for check in doc["checks"]:
        if check["name"] == "flagship_index_two":
            print(json.dumps(check["report"], sort_keys=True))
    return rc


def _cmd_plot(args) -> int:
    try:
        with open(args.report) as fh:
            report = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"cannot read report: {exc}", file=_sys.stderr)
        return 2
    try:
        text = emit_plot_data(report, args.kind)
    except ConfigError as exc:
        print(str(exc), file=_sys.stderr)
        return 2
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return 0


def _cmd_callias(args) -> int:
    try:
        lo, hi = (float(p) for p in args.K.split(","))
    except ValueError:
        print("--K expects two comma-separated numbers", file=_sys.stderr)
        return 2
    if os.path.exists(args.potential):
        x, vals = dirac.potential_from_csv(args.potential)
        profile = np.asarray(vals, dtype=float)
    else:
        try:
            f = dirac.parse_expression(args.potential)
        except ValueError as exc:
            print(f"bad potential: {exc}", file=_sys.stderr)
            return 2
        x = np.linspace(args.x_min, args.x_max, args.samples)
        profile = f(x)
    Phi = profile[:, None, None] * dirac.SIGMA3[None, :, :]
    spec = dirac.CalliasSpec(np.asarray(x, float), Phi, K=(lo, hi),
                             Lambda=args.Lambda, sigma=dirac.SIGMA3)
    rep = dirac.callias_check(spec)
    out = {
        "verdict": rep.verdict,
        "margin_outside_K": rep.margin_outside,
        "classical_condition": rep.classical_holds,
        "plus_passes": rep.plus_passes,
        "minus_passes": rep.minus_passes,
        "skew_defect": rep.skew_defect,
        "grid_spacing": rep.grid_spacing,
    }
    print(json.dumps(out, sort_keys=True))
    return 0 if rep.verdict else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="halfcyl",
                                     description="verification suites for boundary "
                                                 "spectral diagnostics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run verification suites")
    p_verify.add_argument("suites", nargs="*", metavar="suite",
                          help=f"subset of {', '.join(KNOWN_SUITES)}")
    p_verify.add_argument("--config", required=True)
    p_verify.add_argument("--out", default=None)
    p_verify.add_argument("--seed", type=int, default=None)
    p_verify.add_argument("--mutate", default=None,
                          help="inject a deliberate defect (mutation harness)")
    p_verify.set_defaults(func=_cmd_verify)

    p_index = sub.add_parser("index", help="run the index diagnostics")
    p_index.add_argument("--config", required=True)
    p_index.add_argument("--out", default=None)
    p_index.set_defaults(func=_cmd_index)

    p_plot = sub.add_parser("plot", help="emit plot-ready CSV from a suite report")
    p_plot.add_argument("--report", required=True)
    p_plot.add_argument("--kind", required=True,
                        help=f"one of {', '.join(sorted(PLOT_KINDS))}")
    p_plot.add_argument("--out", default=None)
    p_plot.set_defaults(func=_cmd_plot)

    p_cal = sub.add_parser("callias", help="check a sampled Callias potential")
    p_cal.add_argument("--potential", required=True,
                       help="CSV file or closed-form expression in x")
    p_cal.add_argument("--K", required=True, help="compact window a,b")
    p_cal.add_argument("--Lambda", type=float, required=True)
    p_cal.add_argument("--x-min", type=float, default=-6.0)
    p_cal.add_argument("--x-max", type=float, default=6.0)
    p_cal.add_argument("--samples", type=int, default=241)
    p_cal.set_defaults(func=_cmd_callias)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
