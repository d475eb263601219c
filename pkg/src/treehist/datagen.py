"""Synthetic frequency sets replicating the benchmark test bed.

A data distribution pairs a frequency shape (Zipf with a skew parameter, or
folded-Gaussian weights) with a spread shape (cusp-shaped Zipf gaps,
shuffled Zipf gaps, or uniformly random gaps).  Frequency multiset and
value-set positions are generated independently and deterministically for a
given seed; per-sample randomness is the permutation that assigns
frequencies onto positions.

All randomness flows through numpy's PCG64 generator.  Sub-streams are
derived with `numpy.random.SeedSequence([seed, *path])`, which is the
documented splitting rule recorded in reports.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import DomainError, FrequencySet

GENERATOR_NAME = "numpy-pcg64/seedsequence"


def rng_for(seed: int, *path: int) -> np.random.Generator:
    """Deterministic generator for the sub-stream identified by path."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, path)]))


def derive_seed(seed: int, *path: int) -> int:
    """Stable integer sub-seed for the stream identified by path."""
    return int(np.random.SeedSequence([int(seed), *map(int, path)]).generate_state(1)[0])


@dataclass(frozen=True)
class BucketPopulation:
    """All buckets sharing an overall sum c, size b and non-null count t."""

    c: int
    b: int
    t: int

    def __post_init__(self) -> None:
        if not 1 <= self.t <= self.b:
            raise DomainError(f"population needs 1 <= t <= b, got t={self.t}, b={self.b}")
        if self.c < self.t:
            raise DomainError("population sum must cover one count per non-null value")


@dataclass(frozen=True)
class HistogramPopulation:
    """All relations with cardinality total, domain size and non-null count t."""

    total: int
    domain: int
    t: int

    def __post_init__(self) -> None:
        if not 1 <= self.t <= self.domain:
            raise DomainError(f"population needs 1 <= t <= D, got t={self.t}, D={self.domain}")
        if self.total < self.t:
            raise DomainError("population cardinality must cover one count per value")


@dataclass(frozen=True)
class Distribution:
    """Frequency shape plus spread shape, with their skew parameters."""

    freq_kind: str  # "zipf" | "gauss"
    spread_kind: str  # "cusp_max" | "zrand" | "random"
    freq_z: float = 0.0
    spread_z: float = 0.0

    def __post_init__(self) -> None:
        if self.freq_kind not in ("zipf", "gauss"):
            raise DomainError(f"unknown frequency shape: {self.freq_kind!r}")
        if self.spread_kind not in ("cusp_max", "zrand", "random"):
            raise DomainError(f"unknown spread shape: {self.spread_kind!r}")

    @property
    def name(self) -> str:
        if self.freq_kind == "gauss":
            return "gauss_rand"
        return f"zipf_{self.spread_kind}({self.freq_z:g},{self.spread_z:g})"


# the five whole-histogram distributions, by their experiment labels
HISTOGRAM_DISTRIBUTIONS: dict[str, Distribution] = {
    "d1": Distribution("zipf", "cusp_max", freq_z=0.5, spread_z=1.0),
    "d2": Distribution("zipf", "zrand", freq_z=0.5, spread_z=1.0),
    "d3": Distribution("gauss", "random"),
    "d4": Distribution("zipf", "cusp_max", freq_z=1.5, spread_z=1.0),
    "d5": Distribution("zipf", "cusp_max", freq_z=3.0, spread_z=1.0),
}

HISTOGRAM_POPULATIONS: dict[str, HistogramPopulation] = {
    "p1": HistogramPopulation(total=100_000, domain=4100, t=500),
    "p2": HistogramPopulation(total=500_000, domain=4100, t=500),
    "p3": HistogramPopulation(total=500_000, domain=4100, t=1000),
}

T_VAR = {t: BucketPopulation(c=20_000, b=500, t=t) for t in (10, 100, 200, 300, 400, 500)}
B_VAR = {b: BucketPopulation(c=20_000, b=b, t=b // 5) for b in (100, 200, 500, 1000)}
Z_VAR_POPULATION = BucketPopulation(c=20_000, b=400, t=200)


def largest_remainder(weights: np.ndarray, total: int, minimum: int = 0) -> np.ndarray:
    """Integer counts proportional to weights, summing exactly to total.

    Floor quotas first, then hand the leftover units to the largest
    fractional remainders (ties to the lower index).  If a minimum is
    requested, deficient entries are topped up by stealing from the largest
    entries, so the exact total survives.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise DomainError("weights must be a non-empty 1-d sequence")
    if np.any(w < 0) or w.sum() <= 0:
        raise DomainError("weights must be non-negative with a positive sum")
    if total < minimum * w.size:
        raise DomainError(f"total {total} cannot give {w.size} entries at least {minimum}")
    quota = w / w.sum() * total
    counts = np.floor(quota).astype(np.int64)
    frac = quota - counts
    leftover = total - int(counts.sum())
    if leftover > 0:
        order = np.lexsort((np.arange(w.size), -frac))
        counts[order[:leftover]] += 1
    while True:
        short = np.flatnonzero(counts < minimum)
        if short.size == 0:
            break
        need = int((minimum - counts[short]).sum())
        counts[short] = minimum
        rich = np.argsort(-counts, kind="stable")
        for idx in rich:
            if need == 0:
                break
            give = min(need, int(counts[idx]) - minimum)
            counts[idx] -= give
            need -= give
        if need:
            raise DomainError("cannot satisfy the per-entry minimum")
    return counts


def gen_zipf_frequencies(t: int, total: int, z: float, seed: int | None = None) -> np.ndarray:
    """t positive counts proportional to rank**-z, summing exactly to total.

    The vector itself is deterministic; the seed parameter exists for
    interface uniformity (assignment randomness lives in `assemble`).
    """
    if t < 1:
        raise DomainError("need at least one value")
    if total < t:
        raise DomainError(f"total {total} cannot give {t} values a count each")
    if z < 0:
        raise DomainError("zipf skew must be non-negative")
    weights = np.arange(1, t + 1, dtype=np.float64) ** -z
    return largest_remainder(weights, total, minimum=1)


def gen_gauss_frequencies(t: int, total: int, seed: int) -> np.ndarray:
    """t positive counts from folded standard-normal weights.

    Weights are |N(0, 1)| + 1e-6 so the stated unit standard deviation
    yields strictly positive weights before integer normalization.
    """
    if t < 1:
        raise DomainError("need at least one value")
    if total < t:
        raise DomainError(f"total {total} cannot give {t} values a count each")
    rng = rng_for(seed, 0xA0)
    weights = np.abs(rng.standard_normal(t)) + 1e-6
    return largest_remainder(weights, total, minimum=1)


def _cusp_quantiles(t: int, z: float) -> np.ndarray:
    """Zipf quantile gaps arranged ascending-then-descending (peak inside)."""
    if t < 1:
        raise DomainError("need at least one value")
    half = -(-t // 2)
    ranks = np.arange(1, half + 1, dtype=np.float64)
    vals = (half / ranks) ** z  # smallest value 1 at rank == half
    asc = np.sort(np.round(vals).astype(np.int64))
    asc = np.maximum(asc, 1)
    desc = asc[: t - half][::-1]
    return np.concatenate([asc, desc])


def gen_spreads_cuspmax(t: int, z: float, seed: int | None = None) -> np.ndarray:
    """Unimodal integer spread shape: Zipf quantiles up, then mirrored down.

    Deterministic; scale to a concrete domain with `scale_spreads`.
    """
    return _cusp_quantiles(t, z)


def gen_spreads_zrand(t: int, z: float, seed: int) -> np.ndarray:
    """The cusp shape's multiset, randomly permuted."""
    rng = rng_for(seed, 0xB0)
    return rng.permutation(_cusp_quantiles(t, z))


def gen_spreads_random(t: int, seed: int) -> np.ndarray:
    """Uniformly random gap shape (integer gaps in 1..100 before scaling)."""
    if t < 1:
        raise DomainError("need at least one value")
    rng = rng_for(seed, 0xC0)
    return rng.integers(1, 101, size=t)


def scale_spreads(raw: Sequence[int] | np.ndarray, span: int) -> np.ndarray:
    """Rescale a spread shape so the t values cover positions 1..span.

    The first t-1 gaps are renormalized (largest remainder, each >= 1) to
    sum to span-1; the last value's spread is 1 by definition.
    """
    arr = np.asarray(raw, dtype=np.int64)
    t = arr.size
    if t < 1:
        raise DomainError("need at least one spread")
    if span < t:
        raise DomainError(f"{t} values cannot fit a span of {span}")
    if t == 1:
        return np.array([1], dtype=np.int64)
    gaps = largest_remainder(arr[: t - 1].astype(np.float64), span - 1, minimum=1)
    return np.concatenate([gaps, [1]])


def assemble(
    freqs: Sequence[int] | np.ndarray,
    spreads: Sequence[int] | np.ndarray,
    m: int,
    rng: np.random.Generator,
) -> FrequencySet:
    """Place a random permutation of freqs at the spread-implied positions.

    Positions are the prefix sums of the spreads starting at 1 (the last
    spread never moves a position and is ignored).  Spreads whose positions
    overrun the domain are rescaled once, shape-preservingly; if they still
    cannot fit, the domain is too small.
    """
    f = np.asarray(freqs, dtype=np.int64)
    sp = np.asarray(spreads, dtype=np.int64)
    if f.size != sp.size:
        raise DomainError("frequencies and spreads must pair up")
    if np.any(sp < 1):
        raise DomainError("spreads must be positive")
    t = f.size
    if t > m:
        raise DomainError(f"{t} values cannot fit a domain of {m}")
    positions = np.concatenate([[1], 1 + np.cumsum(sp[:-1])])
    if positions[-1] > m:
        sp = scale_spreads(sp, m)
        positions = np.concatenate([[1], 1 + np.cumsum(sp[:-1])])
        if positions[-1] > m:
            raise DomainError("spreads overflow the domain even after rescaling")
    out = np.zeros(m, dtype=np.int64)
    out[positions - 1] = rng.permutation(f)
    return FrequencySet(out)


def _spread_shape(dist: Distribution, t: int, seed: int) -> np.ndarray:
    if dist.spread_kind == "cusp_max":
        return gen_spreads_cuspmax(t, dist.spread_z)
    if dist.spread_kind == "zrand":
        return gen_spreads_zrand(t, dist.spread_z, seed)
    return gen_spreads_random(t, seed)


def _freq_multiset(dist: Distribution, t: int, total: int, seed: int) -> np.ndarray:
    if dist.freq_kind == "zipf":
        return gen_zipf_frequencies(t, total, dist.freq_z, seed)
    return gen_gauss_frequencies(t, total, seed)


@dataclass(frozen=True)
class DataSet:
    """A population/distribution pair plus the shared base material.

    Samples differ only by the frequency permutation, so the frequency
    multiset and value positions are fixed once per data set.
    """

    dist: Distribution
    span: int
    freqs: np.ndarray
    spreads: np.ndarray
    seed: int

    def sample(self, index: int) -> FrequencySet:
        rng = rng_for(self.seed, 0xD0, index)
        return assemble(self.freqs, self.spreads, self.span, rng)


def bucket_dataset(pop: BucketPopulation, dist: Distribution, seed: int) -> DataSet:
    freqs = _freq_multiset(dist, pop.t, pop.c, seed)
    spreads = scale_spreads(_spread_shape(dist, pop.t, seed), pop.b)
    return DataSet(dist=dist, span=pop.b, freqs=freqs, spreads=spreads, seed=seed)


def histogram_dataset(pop: HistogramPopulation, dist: Distribution, seed: int) -> DataSet:
    freqs = _freq_multiset(dist, pop.t, pop.total, seed)
    spreads = scale_spreads(_spread_shape(dist, pop.t, seed), pop.domain)
    return DataSet(dist=dist, span=pop.domain, freqs=freqs, spreads=spreads, seed=seed)


def save_frequency_csv(fs: FrequencySet, path: str) -> None:
    """Write `index,frequency` lines for the non-null entries only."""
    with open(path, "w", encoding="utf-8") as fh:
        for idx in fs.value_set():
            fh.write(f"{int(idx)},{int(fs.freq[idx - 1])}\n")


def load_frequency_csv(path: str, m: int | None = None) -> FrequencySet:
    """Read a sparse `index,frequency` file; m defaults to the largest index."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                idx_text, freq_text = line.split(",")
                idx, count = int(idx_text), int(freq_text)
            except ValueError:
                raise DomainError(f"{path}:{lineno}: expected 'index,frequency'") from None
            if idx < 1 or count < 0:
                raise DomainError(f"{path}:{lineno}: bad index or count")
            pairs.append((idx, count))
    if not pairs:
        raise DomainError(f"{path}: no frequency rows")
    size = m if m is not None else max(idx for idx, _ in pairs)
    freq = np.zeros(size, dtype=np.int64)
    for idx, count in pairs:
        if idx > size:
            raise DomainError(f"{path}: index {idx} beyond domain size {size}")
        freq[idx - 1] += count
    return FrequencySet(freq)
