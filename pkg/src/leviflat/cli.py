"""Command-line runner: load a scenario, run named identity suites, emit a
deterministic JSON report.

Exit status: 0 when all selected identities pass, 1 on any failing identity,
2 on configuration errors.  Every flag has an environment-variable override
with the LEVIFLAT_ prefix (flags win over environment).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import ConfigError, ScenarioError
from .scenarios import BUILTIN_NAMES, resolve
from .suites import REGISTRY, run_identity, select_identities

SCHEMA_VERSION = 1
ENV_PREFIX = "LEVIFLAT_"


@dataclass
class RunConfig:
    scenario: str = "t3_flat"
    suite: str = "all"
    seed: int = 42
    points: int = 20
    tolerances: dict = field(default_factory=dict)
    report_path: str | None = None
    workers: int = 1

    def header(self):
        return {
            "scenario": self.scenario,
            "suite": self.suite,
            "seed": self.seed,
            "points": self.points,
            "tolerances": {k: self.tolerances[k] for k in sorted(self.tolerances)},
            "workers": self.workers,
        }


def parse_tolerances(text):
    """Parse 'id=value,id=value' overrides."""
    out = {}
    if not text:
        return out
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        if "=" not in chunk:
            raise ConfigError(f"bad tolerance override {chunk!r}, expected id=value")
        key, value = chunk.split("=", 1)
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"bad tolerance value {value!r} for {key.strip()!r}")
    return out


def list_suites(stream=None):
    stream = stream or sys.stdout
    for spec in REGISTRY:
        stream.write(f"{spec.identity:<28s} tol={spec.tolerance:<8.1e} {spec.anchor}\n")
    stream.write(f"{len(REGISTRY)} identities\n")


def run(config):
    """Execute the configured suites; returns (exit_status, report_dict)."""
    try:
        scenario = resolve(config.scenario)
    except ScenarioError as exc:
        return 2, {"schema": SCHEMA_VERSION, "error": str(exc)}
    specs = [
        spec
        for spec in select_identities(config.suite)
        if spec.applies(scenario)
    ]
    if not specs:
        return 2, {
            "schema": SCHEMA_VERSION,
            "error": f"no identities match selector {config.suite!r} on scenario {scenario.name!r}",
        }

    def execute(spec):
        return run_identity(
            spec,
            scenario,
            config.seed,
            config.points,
            tolerance=config.tolerances.get(spec.identity),
        )

    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            reports = list(pool.map(execute, specs))
    else:
        reports = [execute(spec) for spec in specs]
    reports.sort(key=lambda r: r.identity)
    all_passed = all(r.passed for r in reports)
    document = {
        "schema": SCHEMA_VERSION,
        "config": config.header(),
        "results": [r.to_dict() for r in reports],
        "passed": all_passed,
    }
    return (0 if all_passed else 1), document


def write_report(document, path):
    text = json.dumps(document, sort_keys=True, separators=(",", ":"))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
        fh.write("\n")


def _env(name, default):
    return os.environ.get(ENV_PREFIX + name, default)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="leviflat",
        description="Run residual checks for foliation/leafwise-complex identities "
        "on built-in or file-defined torus scenarios.",
    )
    parser.add_argument(
        "--scenario",
        default=_env("SCENARIO", "t3_flat"),
        help=f"built-in name ({', '.join(BUILTIN_NAMES)}) or scenario file path",
    )
    parser.add_argument(
        "--suite",
        default=_env("SUITE", "all"),
        help="comma-separated identity-id globs, e.g. 'lemma.*,prop.beth*' (default: all)",
    )
    parser.add_argument("--seed", type=int, default=int(_env("SEED", "42")))
    parser.add_argument("--points", type=int, default=int(_env("POINTS", "20")))
    parser.add_argument(
        "--tol",
        default=_env("TOL", ""),
        help="per-identity tolerance overrides, 'id=value,id=value'",
    )
    parser.add_argument("--report", default=_env("REPORT", None), help="report output path")
    parser.add_argument("--workers", type=int, default=int(_env("WORKERS", "1")))
    parser.add_argument("--list", action="store_true", help="print the identity catalogue and exit")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list:
        list_suites()
        return 0
    try:
        config = RunConfig(
            scenario=args.scenario,
            suite=args.suite,
            seed=args.seed,
            points=args.points,
            tolerances=parse_tolerances(args.tol),
            report_path=args.report,
            workers=max(1, args.workers),
        )
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    status, document = run(config)
    if "error" in document:
        print(f"configuration error: {document['error']}", file=sys.stderr)
        return 2
    for entry in document["results"]:
        status_str = "PASS" if entry["passed"] else "FAIL"
        line = (
            f"[{status_str}] {entry['identity']:<28s} "
            f"max_rel={entry['max_rel']:.3e} tol={entry['tolerance']:.1e}"
        )
        if entry.get("error"):
            line += f"  ({entry['error']})"
        print(line)
    print(f"scenario={document['config']['scenario']} "
          f"passed={document['passed']} identities={len(document['results'])}")
    if config.report_path:
        write_report(document, config.report_path)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
