"""Intra-bucket prefix estimation.

Encoders build the per-bucket payload from the true frequencies at
histogram-construction time; `estimate_prefix` answers S[d], the cumulative
frequency of the first d values of a bucket, from the summary alone.

The two tree indices pack quantized partial sums of the bucket into one
32-bit word.  Each node's sum is coded as a fraction of its parent's sum,
so fewer bits are needed as the tree deepens:

* 4-level tree: 6 bits for the first half, 5 bits for each coded quarter,
  4 bits for each coded eighth (odd quarters/eighths only; even siblings
  are recovered by complement).
* 3-level tree: 11 bits for the half, 10 bits per coded quarter, top bit 0.

Packed word layout (big end first):

    4LT  [31:26]=half1 [25:21]=quarter1 [20:16]=quarter3
         [15:12]=eighth1 [11:8]=eighth3 [7:4]=eighth5 [3:0]=eighth7
    3LT  [31]=0 [30:20]=half1 [19:10]=quarter1 [9:0]=quarter3

Serialized form is the unsigned 32-bit word, big-endian.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    Bucket,
    ConfigError,
    DomainError,
    EstimatorKind,
    Histogram,
    InvariantError,
    RangeQuery,
    delta,
    partition_bounds,
)

_FIELDS_4LT = ((26, 6), (21, 5), (16, 5), (12, 4), (8, 4), (4, 4), (0, 4))
_FIELDS_3LT = ((20, 11), (10, 10), (0, 10))


def round_half_away(x: float) -> int:
    """round(x) with halves away from zero; arguments here are never negative."""
    if x < 0:
        raise DomainError("quantizer input must be non-negative")
    return int(x + 0.5)


def quantize_ratio(num: int, den: int, max_code: int) -> int:
    """<num/den * max_code> in exact integer arithmetic; 0/0 encodes as 0."""
    if den == 0:
        return 0
    q, r = divmod(num * max_code, den)
    return int(q) + (1 if 2 * r >= den else 0)


@dataclass(frozen=True)
class PackedTreeIndex:
    """One 32-bit word holding the quantized partial sums of a tree index."""

    word: int
    levels: int  # 3 or 4

    def __post_init__(self) -> None:
        if self.levels not in (3, 4):
            raise ConfigError(f"tree index has 3 or 4 levels, got {self.levels}")
        if not 0 <= self.word < (1 << 32):
            raise InvariantError("packed word must fit in 32 bits")
        if self.levels == 3 and self.word >> 31:
            raise InvariantError("3-level packed word must keep bit 31 clear")

    @classmethod
    def pack(cls, codes: Sequence[int], levels: int) -> "PackedTreeIndex":
        fields = _FIELDS_4LT if levels == 4 else _FIELDS_3LT
        if len(codes) != len(fields):
            raise ConfigError(f"{levels}-level index needs {len(fields)} codes")
        word = 0
        for code, (shift, width) in zip(codes, fields):
            if not 0 <= code <= (1 << width) - 1:
                raise InvariantError(f"code {code} does not fit in {width} bits")
            word |= code << shift
        return cls(word=word, levels=levels)

    def codes(self) -> tuple[int, ...]:
        fields = _FIELDS_4LT if self.levels == 4 else _FIELDS_3LT
        return tuple((self.word >> shift) & ((1 << width) - 1) for shift, width in fields)

    def to_bytes(self) -> bytes:
        return self.word.to_bytes(4, "big")

    @classmethod
    def from_bytes(cls, raw: bytes, levels: int) -> "PackedTreeIndex":
        if len(raw) != 4:
            raise ConfigError("packed tree index is exactly 4 bytes")
        return cls(word=int.from_bytes(raw, "big"), levels=levels)


@dataclass(frozen=True)
class Split2Payload:
    """Exact cumulative frequency of the first half, stored full width."""

    first_half: int


@dataclass(frozen=True)
class Split4Payload:
    """Four 8-bit codes, one per quarter, each scaled against the bucket sum."""

    codes: tuple[int, int, int, int]


@dataclass(frozen=True)
class Split8Payload:
    """Eight 4-bit codes, one per eighth, each scaled against the bucket sum."""

    codes: tuple[int, ...]


_PAYLOAD_TYPES: dict[EstimatorKind, type | None] = {
    EstimatorKind.CVA: None,
    EstimatorKind.USA: None,
    EstimatorKind.ONE_BIASED: None,
    EstimatorKind.SPLIT2: Split2Payload,
    EstimatorKind.SPLIT4: Split4Payload,
    EstimatorKind.SPLIT8: Split8Payload,
    EstimatorKind.TREE3: PackedTreeIndex,
    EstimatorKind.TREE4: PackedTreeIndex,
}


def encode_split2(freqs: Sequence[int] | np.ndarray) -> Split2Payload:
    """Store the exact first-half sum; no quantization."""
    return Split2Payload(first_half=delta(freqs, 2, 1))


def encode_split4(freqs: Sequence[int] | np.ndarray) -> Split4Payload:
    c = int(np.asarray(freqs).sum())
    codes = tuple(quantize_ratio(delta(freqs, 4, i), c, 255) for i in range(1, 5))
    return Split4Payload(codes=codes)


def encode_split8(freqs: Sequence[int] | np.ndarray) -> Split8Payload:
    c = int(np.asarray(freqs).sum())
    codes = tuple(quantize_ratio(delta(freqs, 8, i), c, 15) for i in range(1, 9))
    return Split8Payload(codes=codes)


def three_level_codes(c: int, half1: int, quarter1: int, quarter3: int) -> tuple[int, int, int]:
    """3LT codes from the true partial sums (11/10/10 bit scales)."""
    return (
        quantize_ratio(half1, c, 2047),
        quantize_ratio(quarter1, half1, 1023),
        quantize_ratio(quarter3, c - half1, 1023),
    )


def four_level_codes(
    c: int,
    half1: int,
    quarters: tuple[int, int, int, int],
    eighths_odd: tuple[int, int, int, int],
) -> tuple[int, ...]:
    """4LT codes from the true partial sums.

    Every numerator and denominator is a true sum, never a decoded
    approximation; `quarters` are all four quarter sums, `eighths_odd` the
    sums of eighths 1, 3, 5 and 7.
    """
    return (
        quantize_ratio(half1, c, 63),
        quantize_ratio(quarters[0], half1, 31),
        quantize_ratio(quarters[2], c - half1, 31),
        quantize_ratio(eighths_odd[0], quarters[0], 15),
        quantize_ratio(eighths_odd[1], quarters[1], 15),
        quantize_ratio(eighths_odd[2], quarters[2], 15),
        quantize_ratio(eighths_odd[3], quarters[3], 15),
    )


def encode_3lt(freqs: Sequence[int] | np.ndarray) -> PackedTreeIndex:
    c = int(np.asarray(freqs).sum())
    codes = three_level_codes(c, delta(freqs, 2, 1), delta(freqs, 4, 1), delta(freqs, 4, 3))
    return PackedTreeIndex.pack(codes, levels=3)


def encode_4lt(freqs: Sequence[int] | np.ndarray) -> PackedTreeIndex:
    c = int(np.asarray(freqs).sum())
    quarters = tuple(delta(freqs, 4, i) for i in range(1, 5))
    eighths_odd = tuple(delta(freqs, 8, i) for i in (1, 3, 5, 7))
    codes = four_level_codes(c, delta(freqs, 2, 1), quarters, eighths_odd)
    return PackedTreeIndex.pack(codes, levels=4)


def encode_payload(kind: EstimatorKind, freqs: Sequence[int] | np.ndarray) -> object | None:
    """Payload for `kind` built from the true bucket frequencies."""
    if kind in (EstimatorKind.CVA, EstimatorKind.USA, EstimatorKind.ONE_BIASED):
        return None
    if kind is EstimatorKind.SPLIT2:
        return encode_split2(freqs)
    if kind is EstimatorKind.SPLIT4:
        return encode_split4(freqs)
    if kind is EstimatorKind.SPLIT8:
        return encode_split8(freqs)
    if kind is EstimatorKind.TREE3:
        return encode_3lt(freqs)
    return encode_4lt(freqs)


@dataclass(frozen=True)
class DecodedTree:
    """Approximate partial sums recovered from a packed tree index.

    Complement construction makes sibling pairs sum to their parent exactly:
    halves sum to c, quarter pairs to their half, eighth pairs (4-level
    only) to their quarter.
    """

    c: float
    halves: tuple[float, float]
    quarters: tuple[float, float, float, float]
    eighths: tuple[float, ...] | None

    def leaf_sums(self) -> tuple[float, ...]:
        """Sums of the smallest sub-buckets (eighths for 4LT, quarters for 3LT)."""
        return self.eighths if self.eighths is not None else self.quarters


def decode_tree(c: int | float, pti: PackedTreeIndex) -> DecodedTree:
    """Recover approximate partial sums; each node scales its parent's value."""
    if pti.levels == 3:
        l12, l14, l34 = pti.codes()
        h1 = l12 / 2047 * c
        h2 = c - h1
        q1 = l14 / 1023 * h1
        q3 = l34 / 1023 * h2
        return DecodedTree(c=float(c), halves=(h1, h2), quarters=(q1, h1 - q1, q3, h2 - q3), eighths=None)
    l12, l14, l34, l18, l38, l58, l78 = pti.codes()
    h1 = l12 / 63 * c
    h2 = c - h1
    q1 = l14 / 31 * h1
    q2 = h1 - q1
    q3 = l34 / 31 * h2
    q4 = h2 - q3
    e1 = l18 / 15 * q1
    e3 = l38 / 15 * q2
    e5 = l58 / 15 * q3
    e7 = l78 / 15 * q4
    return DecodedTree(
        c=float(c),
        halves=(h1, h2),
        quarters=(q1, q2, q3, q4),
        eighths=(e1, q1 - e1, e3, q2 - e3, e5, q3 - e5, e7, q4 - e7),
    )


def check_payload(kind: EstimatorKind, bucket: Bucket) -> None:
    """Raise ConfigError unless the bucket payload matches the estimator kind."""
    want = _PAYLOAD_TYPES[kind]
    ok = bucket.payload is None if want is None else isinstance(bucket.payload, want)
    if ok and want is PackedTreeIndex:
        ok = bucket.payload.levels == (3 if kind is EstimatorKind.TREE3 else 4)
    if not ok:
        raise ConfigError(f"bucket payload {bucket.payload!r} does not match estimator {kind.value}")


def _part_edges(b: int, j: int) -> np.ndarray:
    """Cumulative part boundaries [0, ceil(b/j), ceil(2b/j), ..., b]."""
    return np.array([0] + [partition_bounds(b, j, i)[1] for i in range(1, j + 1)], dtype=np.int64)


def _piecewise_prefix(edges: np.ndarray, sums: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Piecewise-linear prefix through the part sums, evaluated at each d.

    Inside part i the slope is sums[i] / len(part i); empty parts carry sum
    0 and are never selected because d < edges[i] picks the first part whose
    right edge exceeds d.
    """
    cums = np.concatenate([[0.0], np.cumsum(sums)])
    seg = np.searchsorted(edges, d, side="right") - 1
    seg = np.clip(seg, 0, len(sums) - 1)
    start = edges[seg]
    length = edges[seg + 1] - start
    length = np.where(length == 0, 1, length)
    return cums[seg] + (d - start) / length * sums[seg]


def _split_prefix(b: int, c: float, sums: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Split-estimator prefix with the complementary-interval rule.

    For d > b/2 the estimate is c minus the mirrored-suffix estimate, which
    runs the same piecewise procedure on the reversed parts.
    """
    j = len(sums)
    edges = _part_edges(b, j)
    low = _piecewise_prefix(edges, sums, d)
    rev_edges = b - edges[::-1]
    rev_sums = sums[::-1]
    high = c - _piecewise_prefix(rev_edges, rev_sums, b - d)
    return np.where(2 * d > b, high, low)


def _tree_prefix(b: int, dec: DecodedTree, d: np.ndarray) -> np.ndarray:
    leaves = np.array(dec.leaf_sums())
    edges = _part_edges(b, len(leaves))
    out = _piecewise_prefix(edges, leaves, d)
    return np.where(d >= b, dec.c, out)


def estimate_prefix_many(kind: EstimatorKind, bucket: Bucket, ds: np.ndarray) -> np.ndarray:
    """Vectorized estimate of S[d] for every offset in ds (each in [0, b])."""
    b = bucket.size
    c = float(bucket.c)
    ds = np.asarray(ds, dtype=np.int64)
    if ds.size and (ds.min() < 0 or ds.max() > b):
        raise DomainError(f"prefix offsets must lie in [0, {b}]")
    check_payload(kind, bucket)

    if kind is EstimatorKind.CVA:
        est = ds / b * c
    elif kind in (EstimatorKind.USA, EstimatorKind.ONE_BIASED):
        if bucket.t == 0:
            if c > 0:
                raise InvariantError("t=0 with c>0 breaks the bucket invariant")
            return np.zeros_like(ds, dtype=float)
        t = bucket.t
        span = max(b - 1, 1)
        if kind is EstimatorKind.USA:
            est = (1.0 + (t - 1) * (ds - 1) / span) * c / t
        else:
            est = ds / span * (t - 1) / t * c
    elif kind is EstimatorKind.SPLIT2:
        half1 = float(bucket.payload.first_half)
        est = _split_prefix(b, c, np.array([half1, c - half1]), ds)
    elif kind is EstimatorKind.SPLIT4:
        sums = np.array(bucket.payload.codes) / 255 * c
        est = _split_prefix(b, c, sums, ds)
    elif kind is EstimatorKind.SPLIT8:
        sums = np.array(bucket.payload.codes) / 15 * c
        est = _split_prefix(b, c, sums, ds)
    else:
        est = _tree_prefix(b, decode_tree(bucket.c, bucket.payload), ds)

    return np.where(ds == 0, 0.0, est)


def estimate_prefix(kind: EstimatorKind, bucket: Bucket, d: int) -> float:
    """Estimate of S[d], the cumulative sum of the first d bucket values.

    d = 0 always yields 0.  d = b yields c for every kind except USA and
    1-biased, whose closed forms are evaluated as written and need not pass
    through (b, c).
    """
    return float(estimate_prefix_many(kind, bucket, np.array([d]))[0])


def estimate_range(hist: Histogram, query: RangeQuery, m: int | None = None) -> float:
    """Range-query estimate composed over the histogram's buckets.

    Fully covered buckets contribute their exact c; partially overlapped
    ones contribute a difference of prefix estimates, clamped at 0 because
    USA/1b differences can go negative.  Buckets disjoint from the query
    contribute nothing, as do domain positions outside every bucket.
    """
    if m is not None and query.hi > m:
        raise DomainError(f"query [{query.lo}, {query.hi}] outside domain [1, {m}]")
    total = 0.0
    for bucket in hist.buckets:
        if bucket.sup < query.lo or bucket.inf > query.hi:
            continue
        if query.lo <= bucket.inf and bucket.sup <= query.hi:
            total += bucket.c
            continue
        d_lo = max(query.lo, bucket.inf) - bucket.inf + 1
        d_hi = min(query.hi, bucket.sup) - bucket.inf + 1
        part = estimate_prefix(hist.estimator, bucket, d_hi) - estimate_prefix(
            hist.estimator, bucket, d_lo - 1
        )
        total += max(part, 0.0)
    return total


def estimate_cumulative_curve(hist: Histogram, m: int) -> np.ndarray:
    """Estimates of the prefix queries X <= d for every d in 1..m.

    Equivalent to estimate_range(hist, RangeQuery(1, d)) for each d, but
    computed bucket-by-bucket in one vectorized pass.
    """
    curve = np.zeros(m + 1)
    base = 0.0
    pos = 0  # highest domain index filled so far
    for bucket in hist.buckets:
        if bucket.inf > m:
            break
        if bucket.inf - 1 > pos:  # gap positions carry the running total
            curve[pos + 1 : bucket.inf] = base
        hi = min(bucket.sup, m)
        ds = np.arange(1, hi - bucket.inf + 2)
        vals = np.maximum(estimate_prefix_many(hist.estimator, bucket, ds), 0.0)
        curve[bucket.inf : hi + 1] = base + vals
        pos = hi
        if bucket.sup <= m:
            base += bucket.c
    if pos < m:
        curve[pos + 1 :] = base
    return curve[1:]
