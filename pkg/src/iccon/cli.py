"""Command-line entry point: ``iccon {churn,per-request,che-sweep,validate}``.

Exit status is 0 on success, 2 for configuration errors and 3 for runtime or
I/O failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

from . import __version__
from .che import sweep
from .config import load_config
from .errors import ConfigError
from .output import (
    CHURN_AGGREGATE_HEADER,
    PER_REQUEST_AGGREGATE_HEADER,
    PER_REQUEST_HEADER,
    SWEEP_HEADER,
    aggregate_churn,
    aggregate_per_request,
    churn_header,
    churn_rows,
    emit_csv,
    per_request_rows,
    sweep_rows,
)
from .simulator import run_churn_scenario, run_per_request_scenario

log = logging.getLogger("iccon")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

DEFAULT_SEEDS = tuple(range(1, 11))


@dataclass
class RunManifest:
    scenario: str
    config: object
    seeds: tuple = DEFAULT_SEEDS
    output_dir: str = "out"
    policies: tuple = ("iccon",)
    jobs: int = 1
    written: list = field(default_factory=list)

    def validate(self):
        if not self.seeds:
            raise ConfigError("at least one seed is required", "seeds")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct", "seeds")
        if any(not 0 <= s < 2**64 for s in self.seeds):
            raise ConfigError("seeds must be 64-bit unsigned integers", "seeds")
        return self


def parse_seeds(text):
    try:
        seeds = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}", "seeds") from None
    return seeds


def _churn_job(args):
    config, policy = args
    return run_churn_scenario(config, policy)


def _per_request_job(config):
    return run_per_request_scenario(config)


def _map(fn, jobs, n_workers):
    if n_workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        # map preserves input order, so output never depends on scheduling
        return list(pool.map(fn, jobs))


def _echo(manifest, summary):
    cfg = manifest.config
    doc = {
        "version": __version__,
        "scenario": manifest.scenario,
        "seeds": list(manifest.seeds),
        "policies": list(manifest.policies),
        "config": asdict(cfg),
        "summary": summary,
    }
    return json.dumps(doc, indent=2, sort_keys=True, default=list) + "\n"


def run_experiment(manifest):
    """Run every replica, then write CSVs and the manifest echo.

    Returns a summary dict. Files are written only after all replicas have
    finished, in a fixed order.
    """
    manifest.validate()
    out = manifest.output_dir
    os.makedirs(out, exist_ok=True)
    summary = {}
    files = []

    if manifest.scenario == "churn":
        jobs = [(replace(manifest.config, seed=s, policy=p), p)
                for p in manifest.policies for s in manifest.seeds]
        results = _map(_churn_job, jobs, manifest.jobs)
        header = churn_header(manifest.config.M)
        for series in results:
            path = os.path.join(out, f"churn_{series.policy}_seed{series.seed}.csv")
            files.append((path, header, list(churn_rows(series))))
        files.append((os.path.join(out, "churn_aggregate.csv"), CHURN_AGGREGATE_HEADER,
                      aggregate_churn(results)))
        for p in manifest.policies:
            finals = [s.rows[-1].chr_window for s in results if s.policy == p and s.rows]
            summary[f"final_chr_{p}"] = sum(finals) / len(finals) if finals else None
        summary["warmup_capped_seeds"] = sorted(
            {s.seed for s in results if s.warmup_capped})
    elif manifest.scenario == "per-request":
        jobs = [replace(manifest.config, seed=s) for s in manifest.seeds]
        results = _map(_per_request_job, jobs, manifest.jobs)
        for series in results:
            path = os.path.join(out, f"per_request_{series.policy}_seed{series.seed}.csv")
            files.append((path, PER_REQUEST_HEADER, list(per_request_rows(series))))
        files.append((os.path.join(out, "per_request_aggregate.csv"),
                      PER_REQUEST_AGGREGATE_HEADER, aggregate_per_request(results)))
        finals = [s.rows[-1].chr for s in results]
        summary["final_chr"] = sum(finals) / len(finals)
    elif manifest.scenario == "che-sweep":
        spec = manifest.config
        rows = sweep(spec.alphas, spec.c_ratios, spec.C, spec.s, spec.lambda_c)
        files.append((os.path.join(out, "che_sweep.csv"), SWEEP_HEADER, list(sweep_rows(rows))))
        summary["cells"] = len(rows)
        summary["failed_cells"] = sum(r.error is not None for r in rows)
    else:
        raise ConfigError(f"unknown scenario {manifest.scenario!r}", "scenario")

    for path, header, rows in files:
        emit_csv(header, rows, path)
        manifest.written.append(path)
    echo = os.path.join(out, "manifest.json")
    try:
        with open(echo, "w", encoding="utf-8") as fh:
            fh.write(_echo(manifest, summary))
    except OSError as exc:
        raise OSError(f"cannot write {echo}: {exc.strerror or exc}") from exc
    manifest.written.append(echo)
    return summary


def build_parser():
    parser = argparse.ArgumentParser(prog="iccon", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("churn", "FIFO churn with ICCON or random AP selection"),
        ("per-request", "route every request to the best-fit AP"),
        ("che-sweep", "characteristic time and hit ratio over aggregation levels"),
        ("validate", "parse and check a configuration file"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="key = value configuration file")
        if name != "validate":
            p.add_argument("--seeds", help="comma-separated seeds (default: config seed or 1..10)")
            p.add_argument("--out", default="./out", help="output directory (default ./out)")
            p.add_argument("--jobs", type=int, default=1, help="replicas run in parallel")
        if name == "churn":
            p.add_argument("--policy", choices=("iccon", "random", "both"), default="both")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        scenario = None if args.command == "validate" else args.command
        parsed = load_config(args.config, scenario)
        if args.command == "validate":
            print(f"{args.config}: ok ({parsed.scenario})")
            return EXIT_OK
        if args.seeds:
            seeds = parse_seeds(args.seeds)
        elif parsed.seed is not None:
            seeds = (parsed.seed,)
        else:
            seeds = DEFAULT_SEEDS
        if parsed.scenario == "che-sweep":
            config, policies = parsed.sweep, ()
        else:
            config = parsed.sim
            if args.command == "churn":
                policies = ("iccon", "random") if args.policy == "both" else (args.policy,)
            else:
                policies = (config.policy,)
        manifest = RunManifest(parsed.scenario, config, seeds, args.out, policies, args.jobs)
        summary = run_experiment(manifest)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - any other failure is a runtime error
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for path in manifest.written:
        print(path)
    for key, value in summary.items():
        print(f"{key}: {value}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
