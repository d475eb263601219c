"""Domain types and exact ground-truth operations.

An attribute domain is represented purely by indices 1..m; the ingestion
layer is the only place that remembers actual attribute values.  All types
here are immutable after construction and all operations are pure, so they
can be shared freely across workers.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

import numpy as np


class HistogramError(Exception):
    """Base class for errors raised by this package."""


class DomainError(HistogramError):
    """An index, query or size is outside its legal range."""


class ConfigError(HistogramError):
    """Incompatible configuration, e.g. payload/estimator mismatch."""


class InvariantError(HistogramError):
    """A structural invariant does not hold on the given data."""


class EstimatorKind(str, Enum):
    """Intra-bucket estimation methods.

    Values double as the CLI / serialization spelling.
    """

    CVA = "cva"          # linear interpolation over the whole bucket
    USA = "usa"          # equally spaced non-null values, needs t
    ONE_BIASED = "1b"    # probabilistic 1-biased model, needs t
    SPLIT2 = "2s"        # exact first-half sum, 32 extra bits
    SPLIT4 = "4s"        # four 8-bit quarter codes
    SPLIT8 = "8s"        # eight 4-bit eighth codes
    TREE3 = "3lt"        # 3-level tree index, 11/10/10 bits
    TREE4 = "4lt"        # 4-level tree index, 6/5/4 bits per level

    @classmethod
    def parse(cls, name: str) -> "EstimatorKind":
        try:
            return cls(name.lower())
        except ValueError:
            raise ConfigError(f"unknown estimator kind: {name!r}") from None


class FrequencySet:
    """Per-value occurrence counts over an integer domain 1..m.

    `freq[i - 1]` is the count of value i; `cum` holds the m+1 prefix sums
    with `cum[0] == 0`.  Both arrays are read-only.
    """

    __slots__ = ("freq", "cum")

    def __init__(self, freq: Sequence[int] | np.ndarray):
        arr = np.asarray(freq, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise DomainError("frequency set needs a non-empty 1-d sequence")
        if np.any(arr < 0):
            raise InvariantError("frequencies must be non-negative")
        arr = arr.copy()
        arr.setflags(write=False)
        cum = np.concatenate([np.zeros(1, dtype=np.int64), np.cumsum(arr)])
        cum.setflags(write=False)
        self.freq = arr
        self.cum = cum

    @property
    def m(self) -> int:
        """Domain size."""
        return int(self.freq.size)

    @property
    def total(self) -> int:
        """Sum of all frequencies."""
        return int(self.cum[-1])

    def prefix(self, d: int) -> int:
        """Exact cumulative frequency of the first d values; prefix(0) == 0."""
        if not 0 <= d <= self.m:
            raise DomainError(f"prefix index {d} outside [0, {self.m}]")
        return int(self.cum[d])

    def range_count(self, lo: int, hi: int) -> int:
        """Exact answer to the range query lo <= X <= hi."""
        if not 1 <= lo <= hi <= self.m:
            raise DomainError(f"range [{lo}, {hi}] outside domain [1, {self.m}]")
        return int(self.cum[hi] - self.cum[lo - 1])

    def value_set(self) -> np.ndarray:
        """1-based indices of the non-null values, ascending."""
        return np.flatnonzero(self.freq) + 1

    def bucket_freqs(self, inf: int, sup: int) -> np.ndarray:
        """Frequency vector of the domain slice [inf, sup]."""
        if not 1 <= inf <= sup <= self.m:
            raise DomainError(f"bucket [{inf}, {sup}] outside domain [1, {self.m}]")
        return self.freq[inf - 1 : sup]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, FrequencySet) and np.array_equal(self.freq, other.freq)

    def __repr__(self) -> str:
        return f"FrequencySet(m={self.m}, total={self.total})"


@dataclass(frozen=True)
class Spread:
    """Distance from a non-null value to the next non-null one (1 for the last)."""

    index: int
    gap: int


def spreads(fs: FrequencySet) -> list[Spread]:
    """Spreads of all non-null values, in ascending index order."""
    vals = fs.value_set()
    out = []
    for i, v in enumerate(vals):
        gap = int(vals[i + 1] - v) if i + 1 < len(vals) else 1
        out.append(Spread(index=int(v), gap=gap))
    return out


@dataclass(frozen=True)
class Bucket:
    """Summary 4-tuple of a contiguous domain range, plus an optional payload.

    `t` counts non-null values in [inf, sup] and `c` is the exact frequency
    sum there.  The payload, when present, is one of the encoder outputs in
    `treehist.estimators`; which variant is legal is dictated by the
    histogram's estimator kind.
    """

    inf: int
    sup: int
    t: int
    c: int
    payload: object | None = None

    def __post_init__(self) -> None:
        if not 1 <= self.inf <= self.sup:
            raise InvariantError(f"bucket bounds [{self.inf}, {self.sup}] invalid")
        if not 0 <= self.t <= self.size:
            raise InvariantError(f"bucket t={self.t} outside [0, {self.size}]")
        if self.c < 0:
            raise InvariantError("bucket sum c must be non-negative")

    @property
    def size(self) -> int:
        return self.sup - self.inf + 1


def make_bucket(fs: FrequencySet, inf: int, sup: int) -> Bucket:
    """Bucket over [inf, sup] with exact t and c computed from fs."""
    f = fs.bucket_freqs(inf, sup)
    return Bucket(inf=inf, sup=sup, t=int(np.count_nonzero(f)), c=int(f.sum()))


@dataclass(frozen=True)
class Histogram:
    """Ordered, non-overlapping bucket sequence with a declared estimator.

    `storage_bits` is the declared cost under the accounting rules in
    `treehist.builders.bits_per_bucket`; it is None for histograms loaded
    from documents that do not carry it.
    """

    buckets: tuple[Bucket, ...]
    estimator: EstimatorKind
    storage_bits: int | None = None

    def __post_init__(self) -> None:
        if not self.buckets:
            raise InvariantError("histogram needs at least one bucket")
        for prev, cur in zip(self.buckets, self.buckets[1:]):
            if prev.sup >= cur.inf:
                raise InvariantError(
                    f"buckets [{prev.inf},{prev.sup}] and [{cur.inf},{cur.sup}] overlap"
                )

    def __iter__(self) -> Iterator[Bucket]:
        return iter(self.buckets)

    def __len__(self) -> int:
        return len(self.buckets)

    def covers_value_set(self, fs: FrequencySet) -> bool:
        """True if every non-null domain value falls inside some bucket."""
        covered = np.zeros(fs.m, dtype=bool)
        for b in self.buckets:
            covered[b.inf - 1 : b.sup] = True
        return bool(np.all(covered[fs.freq > 0]))


@dataclass(frozen=True)
class RangeQuery:
    """Inclusive range query lo <= X <= hi over domain indices."""

    lo: int
    hi: int

    def __post_init__(self) -> None:
        if not 1 <= self.lo <= self.hi:
            raise DomainError(f"query bounds [{self.lo}, {self.hi}] invalid")

    def true_count(self, fs: FrequencySet) -> int:
        return fs.range_count(self.lo, self.hi)


def partition_bounds(b: int, j: int, i: int) -> tuple[int, int]:
    """Inclusive 1-based sub-range of the i-th of j equal-size parts.

    x = 1 + ceil(b/j * (i-1)), y = ceil(b/j * i).  For b < j some parts are
    empty, signalled by x > y; their frequency sum is defined as 0.
    """
    if b < 1:
        raise DomainError("bucket size must be >= 1")
    if j not in (1, 2, 4, 8):
        raise DomainError(f"parts count must be one of 1, 2, 4, 8, got {j}")
    if not 1 <= i <= j:
        raise DomainError(f"part index {i} outside [1, {j}]")
    x = 1 + -(-b * (i - 1) // j)
    y = -(-b * i // j)
    return x, y


def delta(freqs: Sequence[int] | np.ndarray, j: int, i: int) -> int:
    """Frequency sum of the i-th of j equal-size parts of a bucket slice."""
    arr = np.asarray(freqs)
    x, y = partition_bounds(len(arr), j, i)
    if x > y:
        return 0
    return int(arr[x - 1 : y].sum())
