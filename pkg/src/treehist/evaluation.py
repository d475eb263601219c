"""Query-set execution, error metrics, worst-case bounds, experiment drivers.

Two experiment families are provided: the intra-bucket comparison (every
prefix query inside a single bucket, across method and data-set grids) and
the whole-histogram comparison (every prefix query over the domain, across
builder/estimator combinations at a fixed bit budget).  Both emit JSON
reports plus CSV tables, values in percent with two decimals.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import datagen
from .core import (
    Bucket,
    DomainError,
    EstimatorKind,
    FrequencySet,
    Histogram,
    InvariantError,
)
from .builders import (
    BuildMethod,
    attach_payloads,
    budget_to_buckets,
    build_equisplit,
    build_maxdiff,
    histogram_from_right_edges,
    voptimal_boundaries_multi,
)
from .datagen import (
    B_VAR,
    HISTOGRAM_DISTRIBUTIONS,
    HISTOGRAM_POPULATIONS,
    T_VAR,
    Z_VAR_POPULATION,
    DataSet,
    Distribution,
    bucket_dataset,
    derive_seed,
    histogram_dataset,
)
from .estimators import encode_payload, estimate_cumulative_curve, estimate_prefix_many


@dataclass(frozen=True)
class ErrorReport:
    """Aggregated error of one method over one query set.

    avg_rel averages |true - est| / true over the queries with a non-zero
    true answer; the zero-answer ones are skipped and counted.  norm_abs is
    the absolute-error sum normalized by (overall sum * domain size).
    """

    avg_rel: float
    norm_abs: float
    queries: int
    skipped_zero: int


def _error_report(truth: np.ndarray, est: np.ndarray, norm: float) -> ErrorReport:
    abs_err = np.abs(truth - est)
    nonzero = truth > 0
    skipped = int(truth.size - np.count_nonzero(nonzero))
    if skipped == truth.size:
        raise InvariantError("every query in the set has a zero answer")
    avg_rel = float(np.mean(abs_err[nonzero] / truth[nonzero]))
    return ErrorReport(
        avg_rel=avg_rel,
        norm_abs=float(abs_err.sum() / norm),
        queries=int(truth.size),
        skipped_zero=skipped,
    )


def bucket_of(freqs: Sequence[int] | np.ndarray, kind: EstimatorKind) -> Bucket:
    """Standalone bucket over the whole vector, payload encoded for `kind`."""
    arr = np.asarray(freqs, dtype=np.int64)
    return Bucket(
        inf=1,
        sup=arr.size,
        t=int(np.count_nonzero(arr)),
        c=int(arr.sum()),
        payload=encode_payload(kind, arr),
    )


def run_bucket_queryset(freqs: Sequence[int] | np.ndarray, kind: EstimatorKind) -> ErrorReport:
    """Errors of `kind` over every prefix query S[d], 1 <= d < b."""
    arr = np.asarray(freqs, dtype=np.int64)
    b = arr.size
    if b < 2:
        raise DomainError("bucket query set needs size >= 2")
    c = int(arr.sum())
    if c == 0:
        raise InvariantError("normalized error undefined for an all-zero bucket")
    bucket = bucket_of(arr, kind)
    ds = np.arange(1, b)
    est = estimate_prefix_many(kind, bucket, ds)
    truth = np.cumsum(arr)[:-1].astype(np.float64)
    return _error_report(truth, est, norm=float(c) * b)


def run_histogram_queryset(fs: FrequencySet, hist: Histogram) -> ErrorReport:
    """Errors over the prefix queries X <= d for every domain index d."""
    truth = fs.cum[1:].astype(np.float64)
    est = estimate_cumulative_curve(hist, fs.m)
    if fs.total == 0:
        raise InvariantError("normalized error undefined for an empty relation")
    return _error_report(truth, est, norm=float(fs.total) * fs.m)


def max_abs_error(freqs: Sequence[int] | np.ndarray, kind: EstimatorKind) -> float:
    """Largest |S[d] - estimate| over the query set 1 <= d < b."""
    arr = np.asarray(freqs, dtype=np.int64)
    if arr.size < 2:
        raise DomainError("need a bucket of size >= 2")
    bucket = bucket_of(arr, kind)
    ds = np.arange(1, arr.size)
    est = estimate_prefix_many(kind, bucket, ds)
    truth = np.cumsum(arr)[:-1].astype(np.float64)
    return float(np.max(np.abs(truth - est)))


# smallest sub-bucket divisor per method: the interpolation segment length is b/that
_SMALLEST_PART = {
    EstimatorKind.CVA: 1,
    EstimatorKind.USA: 1,
    EstimatorKind.ONE_BIASED: 1,
    EstimatorKind.SPLIT2: 2,
    EstimatorKind.SPLIT4: 4,
    EstimatorKind.TREE3: 4,
    EstimatorKind.SPLIT8: 8,
    EstimatorKind.TREE4: 8,
}

_SCALING_DIV = {
    EstimatorKind.SPLIT4: 2**9,
    EstimatorKind.SPLIT8: 2**5,
    EstimatorKind.TREE3: 2**12,
    EstimatorKind.TREE4: 2**7,
}


def theorem1_bounds(kind: EstimatorKind, max_freq: int, b: int) -> tuple[float, float]:
    """Worst-case (interpolation, scaling) absolute-error bounds.

    Requires b to be a multiple of 8, the hypothesis the analysis is stated
    under.  Interpolation is F*b/(4 * smallest-part count); scaling applies
    only to the quantized methods.
    """
    if b < 8 or b % 8 != 0:
        raise DomainError("the worst-case analysis assumes b to be a positive multiple of 8")
    if max_freq < 0:
        raise DomainError("maximum frequency must be non-negative")
    interp = max_freq * b / (4 * _SMALLEST_PART[kind])
    div = _SCALING_DIV.get(kind)
    scaling = max_freq * b / div if div else 0.0
    return interp, scaling


def adversarial_bucket(kind: EstimatorKind, max_freq: int, b: int) -> np.ndarray:
    """Worst-case construction: half of one smallest sub-bucket at max_freq.

    The first half of the first smallest sub-bucket is filled with
    max_freq, everything else is zero; the worst query ends exactly at the
    filled half.  When the smallest sub-bucket is a single position the
    half-full pattern degenerates to one filled position.
    """
    if b < 8 or b % 8 != 0:
        raise DomainError("the worst-case analysis assumes b to be a positive multiple of 8")
    if max_freq < 1:
        raise DomainError("maximum frequency must be positive")
    part = b // _SMALLEST_PART[kind]
    filled = max(1, part // 2)
    freq = np.zeros(b, dtype=np.int64)
    freq[:filled] = max_freq
    return freq


# ---------------------------------------------------------------------------
# experiment drivers


INSIDE_METHODS: tuple[EstimatorKind, ...] = (
    EstimatorKind.USA,
    EstimatorKind.ONE_BIASED,
    EstimatorKind.SPLIT2,
    EstimatorKind.SPLIT4,
    EstimatorKind.SPLIT8,
    EstimatorKind.TREE3,
    EstimatorKind.TREE4,
)

# whole-histogram builder/estimator combos, by their table labels
HISTOGRAM_COMBOS: dict[str, tuple[BuildMethod, EstimatorKind]] = {
    "es": (BuildMethod.EQUISPLIT, EstimatorKind.CVA),
    "es_4lt": (BuildMethod.EQUISPLIT, EstimatorKind.TREE4),
    "md": (BuildMethod.MAXDIFF, EstimatorKind.CVA),
    "md_4lt": (BuildMethod.MAXDIFF, EstimatorKind.TREE4),
    "vo": (BuildMethod.VOPTIMAL, EstimatorKind.CVA),
    "vo_4lt": (BuildMethod.VOPTIMAL, EstimatorKind.TREE4),
}


def _zipf_cusp(z: float) -> Distribution:
    return Distribution("zipf", "cusp_max", freq_z=z, spread_z=1.0)


_GAUSS = Distribution("gauss", "random")


INSIDE_CLASSES = ("zipf_t", "zipf_b", "gauss_t", "gauss_b", "zipf_z")


def inside_bucket_datasets(class_name: str, seed: int) -> list[tuple[str, DataSet]]:
    """The labelled data sets of one intra-bucket experiment class."""
    if class_name == "zipf_t":
        grid = [(f"t={t}", pop, _zipf_cusp(0.5)) for t, pop in sorted(T_VAR.items())]
    elif class_name == "zipf_b":
        grid = [(f"b={b}", pop, _zipf_cusp(0.5)) for b, pop in sorted(B_VAR.items())]
    elif class_name == "gauss_t":
        grid = [(f"t={t}", pop, _GAUSS) for t, pop in sorted(T_VAR.items())]
    elif class_name == "gauss_b":
        grid = [(f"b={b}", pop, _GAUSS) for b, pop in sorted(B_VAR.items())]
    elif class_name == "zipf_z":
        grid = [(f"z={z}", Z_VAR_POPULATION, _zipf_cusp(z)) for z in (0.5, 1.0, 1.5)]
    else:
        raise DomainError(f"unknown data-set class: {class_name!r}")
    class_idx = INSIDE_CLASSES.index(class_name)
    sets: list[tuple[str, DataSet]] = []
    for idx, (label, pop, dist) in enumerate(grid):
        ds = bucket_dataset(pop, dist, derive_seed(seed, class_idx, idx))
        sets.append((label, ds))
    return sets


@dataclass(frozen=True)
class InsideBucketConfig:
    classes: tuple[str, ...] = ("zipf_t", "zipf_b", "gauss_t", "gauss_b", "zipf_z")
    methods: tuple[EstimatorKind, ...] = INSIDE_METHODS
    samples: int = 100
    seed: int = 1

    @classmethod
    def from_json(cls, doc: Mapping) -> "InsideBucketConfig":
        kwargs = {}
        if "classes" in doc:
            kwargs["classes"] = tuple(doc["classes"])
        if "methods" in doc:
            kwargs["methods"] = tuple(EstimatorKind.parse(n) for n in doc["methods"])
        if "samples" in doc:
            kwargs["samples"] = int(doc["samples"])
        if "seed" in doc:
            kwargs["seed"] = int(doc["seed"])
        return cls(**kwargs)


@dataclass
class InsideBucketReport:
    config: InsideBucketConfig
    # class -> data-set label -> method value -> metric name -> mean
    cells: dict[str, dict[str, dict[str, dict[str, float]]]] = field(default_factory=dict)

    def mean_avg_rel(self, class_name: str, label: str, kind: EstimatorKind) -> float:
        return self.cells[class_name][label][kind.value]["avg_rel"]

    def to_json(self) -> dict:
        return {
            "experiment": "inside_bucket",
            "generator": datagen.GENERATOR_NAME,
            "config": {
                "classes": list(self.config.classes),
                "methods": [k.value for k in self.config.methods],
                "samples": self.config.samples,
                "seed": self.config.seed,
            },
            "cells": self.cells,
        }

    def write_csv(self, out_dir: str) -> list[str]:
        """One table per class: method rows, data-set columns, percent."""
        import os

        paths = []
        for class_name, by_label in self.cells.items():
            path = os.path.join(out_dir, f"inside_{class_name}.csv")
            labels = list(by_label)
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["method"] + [f"{lab} (%)" for lab in labels])
                for kind in self.config.methods:
                    row = [kind.value]
                    for lab in labels:
                        row.append(f"{100 * by_label[lab][kind.value]['avg_rel']:.2f}")
                    writer.writerow(row)
            paths.append(path)
        return paths


def experiment_inside_bucket(config: InsideBucketConfig) -> InsideBucketReport:
    """Mean intra-bucket error per (data set, method) over permuted samples."""
    report = InsideBucketReport(config=config)
    for class_name in config.classes:
        by_label: dict[str, dict[str, dict[str, float]]] = {}
        for label, ds in inside_bucket_datasets(class_name, config.seed):
            sums = {kind: np.zeros(2) for kind in config.methods}
            for sample_idx in range(config.samples):
                fs = ds.sample(sample_idx)
                for kind in config.methods:
                    rep = run_bucket_queryset(fs.freq, kind)
                    sums[kind] += (rep.avg_rel, rep.norm_abs)
            by_label[label] = {
                kind.value: {
                    "avg_rel": float(sums[kind][0] / config.samples),
                    "norm_abs": float(sums[kind][1] / config.samples),
                }
                for kind in config.methods
            }
        report.cells[class_name] = by_label
    return report


@dataclass(frozen=True)
class HistogramConfig:
    distributions: tuple[str, ...] = ("d1", "d2", "d3", "d4", "d5")
    populations: tuple[str, ...] = ("p1", "p2", "p3")
    methods: tuple[str, ...] = ("es", "es_4lt", "md", "md_4lt", "vo", "vo_4lt")
    budget_bits: int = 42 * 32
    histograms: int = 10
    seed: int = 1
    # optional storage sweep (in stored 4-byte integers) on distribution d4 / population p1
    sweep_integers: tuple[int, ...] = ()

    @classmethod
    def from_json(cls, doc: Mapping) -> "HistogramConfig":
        kwargs = {}
        for key in ("distributions", "populations", "methods"):
            if key in doc:
                kwargs[key] = tuple(str(v).lower() for v in doc[key])
        for key in ("budget_bits", "histograms", "seed"):
            if key in doc:
                kwargs[key] = int(doc[key])
        if "sweep_integers" in doc:
            kwargs["sweep_integers"] = tuple(int(v) for v in doc["sweep_integers"])
        return cls(**kwargs)


@dataclass
class HistogramReport:
    config: HistogramConfig
    # population -> method label -> distribution -> mean avg_rel (fraction)
    tables: dict[str, dict[str, dict[str, float]]] = field(default_factory=dict)
    # method label -> stored-integer count -> mean avg_rel (fraction)
    sweep: dict[str, dict[int, float]] = field(default_factory=dict)

    def value(self, pop: str, method: str, dist: str) -> float:
        return self.tables[pop][method][dist]

    def to_json(self) -> dict:
        return {
            "experiment": "histogram",
            "generator": datagen.GENERATOR_NAME,
            "config": {
                "distributions": list(self.config.distributions),
                "populations": list(self.config.populations),
                "methods": list(self.config.methods),
                "budget_bits": self.config.budget_bits,
                "histograms": self.config.histograms,
                "seed": self.config.seed,
                "sweep_integers": list(self.config.sweep_integers),
            },
            "tables": self.tables,
            "sweep": {m: {str(k): v for k, v in row.items()} for m, row in self.sweep.items()},
        }

    def write_csv(self, out_dir: str) -> list[str]:
        import os

        paths = []
        for pop, by_method in self.tables.items():
            path = os.path.join(out_dir, f"table_{pop}.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["method"] + [f"{d} (%)" for d in self.config.distributions])
                for method in self.config.methods:
                    row = [method]
                    for dist in self.config.distributions:
                        row.append(f"{100 * by_method[method][dist]:.2f}")
                    writer.writerow(row)
            paths.append(path)
        if self.sweep:
            path = os.path.join(out_dir, "sweep_d4_p1.csv")
            with open(path, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["method"] + [f"{n} ints (%)" for n in self.config.sweep_integers])
                for method in self.config.methods:
                    row = [method]
                    for n in self.config.sweep_integers:
                        row.append(f"{100 * self.sweep[method][n]:.2f}")
                    writer.writerow(row)
            paths.append(path)
        return paths


def _build_combo_histograms(
    fs: FrequencySet, combos: Mapping[str, tuple[BuildMethod, EstimatorKind]], budget_bits: int
) -> dict[str, Histogram]:
    """All requested histograms over fs; V-Optimal counts share one DP run."""
    counts = {
        label: min(budget_to_buckets(budget_bits, method, kind), fs.m)
        for label, (method, kind) in combos.items()
    }
    vo_counts = sorted({counts[l] for l, (meth, _) in combos.items() if meth is BuildMethod.VOPTIMAL})
    vo_bounds = voptimal_boundaries_multi(fs, vo_counts) if vo_counts else {}
    out = {}
    for label, (method, kind) in combos.items():
        k = counts[label]
        if method is BuildMethod.VOPTIMAL:
            hist = histogram_from_right_edges(fs, vo_bounds[k][0], method)
        elif method is BuildMethod.MAXDIFF:
            hist = build_maxdiff(fs, k)
        else:
            hist = build_equisplit(fs, k)
        if kind is not EstimatorKind.CVA:
            hist = attach_payloads(hist, fs, kind)
        out[label] = hist
    return out


def _mean_errors_for_dataset(
    ds: DataSet,
    combos: Mapping[str, tuple[BuildMethod, EstimatorKind]],
    budget_bits: int,
    samples: int,
) -> dict[str, float]:
    sums = {label: 0.0 for label in combos}
    for sample_idx in range(samples):
        fs = ds.sample(sample_idx)
        for label, hist in _build_combo_histograms(fs, combos, budget_bits).items():
            sums[label] += run_histogram_queryset(fs, hist).avg_rel
    return {label: total / samples for label, total in sums.items()}


def experiment_histogram(config: HistogramConfig) -> HistogramReport:
    """Mean whole-histogram error per (population, distribution, method)."""
    combos = {label: HISTOGRAM_COMBOS[label] for label in config.methods}
    report = HistogramReport(config=config)
    for p_idx, pop_name in enumerate(config.populations):
        pop = HISTOGRAM_POPULATIONS[pop_name]
        table: dict[str, dict[str, float]] = {label: {} for label in combos}
        for d_idx, dist_name in enumerate(config.distributions):
            dist = HISTOGRAM_DISTRIBUTIONS[dist_name]
            ds = histogram_dataset(pop, dist, derive_seed(config.seed, 0xE0, p_idx, d_idx))
            means = _mean_errors_for_dataset(ds, combos, config.budget_bits, config.histograms)
            for label, value in means.items():
                table[label][dist_name] = value
        report.tables[pop_name] = table

    if config.sweep_integers:
        pop = HISTOGRAM_POPULATIONS["p1"]
        dist = HISTOGRAM_DISTRIBUTIONS["d4"]
        report.sweep = {label: {} for label in combos}
        for s_idx, n_ints in enumerate(config.sweep_integers):
            ds = histogram_dataset(pop, dist, derive_seed(config.seed, 0xF0, s_idx))
            means = _mean_errors_for_dataset(ds, combos, 32 * n_ints, config.histograms)
            for label, value in means.items():
                report.sweep[label][n_ints] = value
    return report


def save_report_json(report: InsideBucketReport | HistogramReport, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_json(), fh, indent=2)
        fh.write("\n")
