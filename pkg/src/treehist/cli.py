"""Command-line front end.

Subcommands: gen (synthetic data sets), build (histogram from a frequency
CSV), eval-bucket / eval-hist (experiment drivers from a JSON config) and
ingest (raw attribute values -> frequency CSV).

Exit codes: 0 success, 2 usage, 3 I/O or input parsing, 4 violated domain
invariant or configuration contract.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from collections import Counter

from .builders import BuildMethod, build, save_histogram
from .core import EstimatorKind, HistogramError
from .datagen import (
    GENERATOR_NAME,
    HISTOGRAM_DISTRIBUTIONS,
    HISTOGRAM_POPULATIONS,
    histogram_dataset,
    derive_seed,
    load_frequency_csv,
    save_frequency_csv,
)
from .evaluation import (
    HistogramConfig,
    InsideBucketConfig,
    experiment_histogram,
    experiment_inside_bucket,
    save_report_json,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_INVARIANT = 4


class _CliUsage(Exception):
    pass


def _cmd_gen(args: argparse.Namespace) -> int:
    dist_name = args.distribution.lower()
    pop_name = args.population.lower()
    if dist_name not in HISTOGRAM_DISTRIBUTIONS:
        raise _CliUsage(f"unknown distribution {args.distribution!r}; pick one of "
                        f"{', '.join(HISTOGRAM_DISTRIBUTIONS)}")
    if pop_name not in HISTOGRAM_POPULATIONS:
        raise _CliUsage(f"unknown population {args.population!r}; pick one of "
                        f"{', '.join(HISTOGRAM_POPULATIONS)}")
    pop = HISTOGRAM_POPULATIONS[pop_name]
    ds = histogram_dataset(pop, HISTOGRAM_DISTRIBUTIONS[dist_name], derive_seed(args.seed, 0x9E))
    os.makedirs(args.out, exist_ok=True)
    files = []
    for idx in range(args.samples):
        fs = ds.sample(idx)
        name = f"sample_{idx:03d}.csv"
        save_frequency_csv(fs, os.path.join(args.out, name))
        files.append(name)
    manifest = {
        "distribution": dist_name,
        "population": {"T": pop.total, "D": pop.domain, "t": pop.t},
        "seed": args.seed,
        "generator": GENERATOR_NAME,
        "domain_size": pop.domain,
        "samples": files,
    }
    with open(os.path.join(args.out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    print(f"wrote {len(files)} samples + manifest to {args.out}")
    return EXIT_OK


def _cmd_build(args: argparse.Namespace) -> int:
    if (args.buckets is None) == (args.budget_bits is None):
        raise _CliUsage("give exactly one of --buckets or --budget-bits")
    fs = load_frequency_csv(args.input, m=args.domain_size)
    method = BuildMethod.parse(args.method)
    kind = EstimatorKind.parse(args.estimator)
    hist = build(fs, method, kind, buckets=args.buckets, budget_bits=args.budget_bits)
    save_histogram(hist, args.out)
    print(f"{len(hist)} buckets, {hist.storage_bits} storage bits -> {args.out}")
    return EXIT_OK


def _load_config(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _cmd_eval_bucket(args: argparse.Namespace) -> int:
    doc = _load_config(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.samples is not None:
        doc["samples"] = args.samples
    config = InsideBucketConfig.from_json(doc)
    report = experiment_inside_bucket(config)
    os.makedirs(args.out, exist_ok=True)
    save_report_json(report, os.path.join(args.out, "inside_report.json"))
    paths = report.write_csv(args.out)
    print(f"wrote {len(paths) + 1} report files to {args.out}")
    return EXIT_OK


def _cmd_eval_hist(args: argparse.Namespace) -> int:
    doc = _load_config(args.config)
    if args.seed is not None:
        doc["seed"] = args.seed
    if args.samples is not None:
        doc["histograms"] = args.samples
    config = HistogramConfig.from_json(doc)
    report = experiment_histogram(config)
    os.makedirs(args.out, exist_ok=True)
    save_report_json(report, os.path.join(args.out, "histogram_report.json"))
    paths = report.write_csv(args.out)
    print(f"wrote {len(paths) + 1} report files to {args.out}")
    return EXIT_OK


def _cmd_ingest(args: argparse.Namespace) -> int:
    counts: Counter[int] = Counter()
    with open(args.input, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            try:
                value = int(text.split(",")[0])
            except ValueError:
                print(f"{args.input}:{lineno}: not an integer attribute value: {text!r}",
                      file=sys.stderr)
                return EXIT_IO
            counts[value] += 1
    if not counts:
        print(f"{args.input}: no attribute values found", file=sys.stderr)
        return EXIT_IO

    lo, hi = min(counts), max(counts)
    if args.dense:
        mapping = {value: idx + 1 for idx, value in enumerate(sorted(counts))}
    else:
        mapping = {value: value - lo + 1 for value in sorted(counts)}
    m = len(mapping) if args.dense else hi - lo + 1

    with open(args.out, "w", encoding="utf-8") as fh:
        for value in sorted(counts):
            fh.write(f"{mapping[value]},{counts[value]}\n")
    sidecar = {
        "source": args.input,
        "domain_size": m,
        "dense": bool(args.dense),
        "min_value": lo,
        "max_value": hi,
        "index_of_value": {str(v): i for v, i in mapping.items()} if args.dense else None,
        "total": sum(counts.values()),
        "distinct": len(counts),
    }
    with open(args.out + ".mapping.json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")
    print(f"{sum(counts.values())} rows, {len(counts)} distinct values, domain size {m} -> {args.out}")
    return EXIT_OK


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treehist",
        description="Bucket histograms with tree-indexed intra-bucket estimation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic data set (CSV samples + manifest)")
    p.add_argument("distribution", help="d1..d5")
    p.add_argument("population", help="p1..p3")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("build", help="build a histogram from a frequency CSV")
    p.add_argument("input", help="index,frequency CSV")
    p.add_argument("--method", required=True, choices=[m.value for m in BuildMethod])
    p.add_argument("--estimator", default="cva", choices=[k.value for k in EstimatorKind])
    p.add_argument("--buckets", type=int)
    p.add_argument("--budget-bits", type=int, dest="budget_bits")
    p.add_argument("--domain-size", type=int, dest="domain_size",
                   help="override the domain size (default: largest index in the CSV)")
    p.add_argument("--out", required=True, help="output histogram JSON")
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("eval-bucket", help="run the intra-bucket experiment from a JSON config")
    p.add_argument("config", help="JSON config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--samples", type=int, help="override the config sample count")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_eval_bucket)

    p = sub.add_parser("eval-hist", help="run the whole-histogram experiment from a JSON config")
    p.add_argument("config", help="JSON config file")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--samples", type=int, help="override the config histogram count")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_eval_hist)

    p = sub.add_parser("ingest", help="count raw attribute values into a frequency CSV")
    p.add_argument("input", help="file with one integer attribute value per line")
    p.add_argument("--dense", action="store_true",
                   help="re-index distinct values densely instead of spanning min..max")
    p.add_argument("--out", required=True, help="output frequency CSV")
    p.set_defaults(func=_cmd_ingest)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        return args.func(args)
    except _CliUsage as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, PermissionError, IsADirectoryError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except HistogramError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
