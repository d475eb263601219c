"""Histogram construction under a bucket-count or bit-budget constraint.

Storage accounting follows the 32-bit-integer convention: every bucket
stores its frequency sum; MaxDiff and V-Optimal buckets additionally store
one boundary integer (the 1-biased layout needs a single bound per bucket),
EquiSplit boundaries are implied by the common width and cost nothing.
Every estimator except plain interpolation adds one more 32-bit item per
bucket (the packed word, the stored half sum, or the non-null count that
USA/1b evaluation requires).
"""
from __future__ import annotations

import json
from enum import Enum
from typing import Sequence

import numpy as np

from .core import (
    Bucket,
    ConfigError,
    DomainError,
    EstimatorKind,
    FrequencySet,
    Histogram,
    InvariantError,
    make_bucket,
    spreads,
)
from .estimators import (
    PackedTreeIndex,
    Split2Payload,
    Split4Payload,
    Split8Payload,
    encode_payload,
)


class BuildMethod(str, Enum):
    EQUISPLIT = "es"
    MAXDIFF = "md"
    VOPTIMAL = "vo"

    @classmethod
    def parse(cls, name: str) -> "BuildMethod":
        try:
            return cls(name.lower())
        except ValueError:
            raise ConfigError(f"unknown build method: {name!r}") from None


def payload_bits(kind: EstimatorKind) -> int:
    """Extra 32-bit item per bucket for everything beyond plain interpolation."""
    return 0 if kind is EstimatorKind.CVA else 32


def bits_per_bucket(method: BuildMethod, kind: EstimatorKind) -> int:
    boundary = 0 if method is BuildMethod.EQUISPLIT else 32
    return boundary + 32 + payload_bits(kind)


def budget_to_buckets(budget_bits: int, method: BuildMethod, kind: EstimatorKind) -> int:
    """Bucket count affordable under the bit budget; at least one required."""
    if budget_bits <= 0:
        raise ConfigError("storage budget must be positive")
    count = budget_bits // bits_per_bucket(method, kind)
    if count < 1:
        raise ConfigError(
            f"budget of {budget_bits} bits cannot pay for one "
            f"{method.value}+{kind.value} bucket ({bits_per_bucket(method, kind)} bits)"
        )
    return count


def build_equisplit(fs: FrequencySet, k: int) -> Histogram:
    """Buckets of common width ceil(m/k); the last one may be shorter."""
    if not 1 <= k <= fs.m:
        raise DomainError(f"bucket count {k} outside [1, {fs.m}]")
    width = -(-fs.m // k)
    buckets = []
    lo = 1
    while lo <= fs.m:
        hi = min(lo + width - 1, fs.m)
        buckets.append(make_bucket(fs, lo, hi))
        lo = hi + 1
    hist = Histogram(buckets=tuple(buckets), estimator=EstimatorKind.CVA, storage_bits=None)
    return _with_storage(hist, BuildMethod.EQUISPLIT)


def maxdiff_boundaries(fs: FrequencySet, h: int) -> list[int]:
    """Positions in the value set after which MaxDiff places a boundary.

    Returns 0-based indices i into the value set such that a bucket ends
    with value i and the next starts at value i+1.  A boundary goes between
    the h-1 largest signed adjacent area differences (area = frequency *
    spread), so cuts land before jumps up; ties prefer the leftmost pair.
    """
    if h < 1:
        raise DomainError("bucket count must be >= 1")
    sp = spreads(fs)
    if not sp:
        raise InvariantError("cannot build a histogram over an empty value set")
    areas = np.array([fs.freq[s.index - 1] * s.gap for s in sp], dtype=np.float64)
    if len(sp) == 1 or h == 1:
        return []
    diffs = np.diff(areas)
    order = np.argsort(-diffs, kind="stable")  # stable keeps leftmost ties first
    chosen = sorted(int(i) for i in order[: h - 1])
    return chosen


def build_maxdiff(fs: FrequencySet, h: int) -> Histogram:
    """MaxDiff histogram with at most h buckets.

    Bucket extents use the storage-optimized layout: each bucket runs from
    the first non-null value of its group to just before the next group's
    first non-null value; the last bucket absorbs the domain tail, so a
    single boundary integer per bucket suffices.
    """
    cuts = maxdiff_boundaries(fs, h)
    vals = fs.value_set()
    starts = [int(vals[0])] + [int(vals[i + 1]) for i in cuts]
    buckets = []
    for g, lo in enumerate(starts):
        hi = starts[g + 1] - 1 if g + 1 < len(starts) else fs.m
        buckets.append(make_bucket(fs, lo, hi))
    hist = Histogram(buckets=tuple(buckets), estimator=EstimatorKind.CVA, storage_bits=None)
    return _with_storage(hist, BuildMethod.MAXDIFF)


def voptimal_boundaries_multi(
    fs: FrequencySet, counts: Sequence[int]
) -> dict[int, tuple[list[int], float]]:
    """SSE-optimal partitions for several bucket counts from one DP table.

    Returns, per requested count h, the bucket right endpoints (ascending,
    last one m) and the minimal total SSE over partitions of [1, m] into
    min(h, m) buckets.  Nulls count toward each bucket's SSE like any other
    position.  Ties resolve to the leftmost boundaries.

    The recurrence is evaluated in full (O(m^2) per level, vectorized over
    the right endpoint).  Interval SSE on an unsorted sequence does not
    satisfy the quadrangle inequality, so argmin-windowing shortcuts would
    be unsound here.
    """
    if not counts or any(h < 1 for h in counts):
        raise DomainError("bucket counts must be >= 1")
    m = fs.m
    wanted = sorted({min(h, m) for h in counts})
    hmax = wanted[-1]
    f = fs.freq.astype(np.float64)
    s = np.concatenate([[0.0], np.cumsum(f)])
    ss = np.concatenate([[0.0], np.cumsum(f * f)])

    cost = np.full(m + 1, np.inf)
    i_all = np.arange(1, m + 1)
    cost[1:] = ss[1:] - s[1:] * s[1:] / i_all  # one bucket
    args: list[np.ndarray] = []
    totals = {1: float(cost[m])}
    for level in range(2, hmax + 1):
        cur = np.full(m + 1, np.inf)
        arg = np.zeros(m + 1, dtype=np.int64)
        # exactly `level` buckets need i >= level; shorter prefixes stay infeasible
        for k in range(level - 1, m):
            base = cost[k]
            lengths = np.arange(1, m - k + 1, dtype=np.float64)
            tot = s[k + 1 :] - s[k]
            vals = base + (ss[k + 1 :] - ss[k] - tot * tot / lengths)
            better = vals < cur[k + 1 :]  # strict: ties keep the leftmost k
            cur[k + 1 :][better] = vals[better]
            arg[k + 1 :][better] = k
        args.append(arg)
        cost = cur
        totals[level] = float(cost[m])

    out = {}
    for h in wanted:
        bounds = [m]
        pos = m
        for arg in reversed(args[: h - 1]):
            pos = int(arg[pos])
            bounds.append(pos)
        out[h] = (sorted(b for b in bounds if b > 0), totals[h])
    for h in counts:
        if min(h, m) != h:
            out[h] = out[min(h, m)]
    return out


def voptimal_boundaries(fs: FrequencySet, h: int) -> tuple[list[int], float]:
    """Optimal partition of [1, m] into min(h, m) buckets by total SSE."""
    return voptimal_boundaries_multi(fs, [h])[h]


def histogram_from_right_edges(fs: FrequencySet, bounds: Sequence[int], method: BuildMethod) -> Histogram:
    """Plain-interpolation histogram over the contiguous partition `bounds`."""
    buckets = []
    lo = 1
    for hi in bounds:
        buckets.append(make_bucket(fs, lo, hi))
        lo = hi + 1
    hist = Histogram(buckets=tuple(buckets), estimator=EstimatorKind.CVA, storage_bits=None)
    return _with_storage(hist, method)


def build_voptimal(fs: FrequencySet, h: int) -> Histogram:
    if not 1 <= h:
        raise DomainError("bucket count must be >= 1")
    bounds, _ = voptimal_boundaries(fs, h)
    return histogram_from_right_edges(fs, bounds, BuildMethod.VOPTIMAL)


def partition_sse(fs: FrequencySet, hist: Histogram) -> float:
    """Total within-bucket SSE of an existing partition."""
    f = fs.freq.astype(np.float64)
    total = 0.0
    for b in hist.buckets:
        seg = f[b.inf - 1 : b.sup]
        total += float(np.sum((seg - seg.mean()) ** 2))
    return total


_BUILDERS = {
    BuildMethod.EQUISPLIT: build_equisplit,
    BuildMethod.MAXDIFF: build_maxdiff,
    BuildMethod.VOPTIMAL: build_voptimal,
}


def _with_storage(hist: Histogram, method: BuildMethod) -> Histogram:
    bits = len(hist.buckets) * bits_per_bucket(method, hist.estimator)
    return Histogram(buckets=hist.buckets, estimator=hist.estimator, storage_bits=bits)


def attach_payloads(hist: Histogram, fs: FrequencySet, kind: EstimatorKind) -> Histogram:
    """Re-encode every bucket's payload for `kind` from the true frequencies."""
    buckets = tuple(
        Bucket(
            inf=b.inf,
            sup=b.sup,
            t=b.t,
            c=b.c,
            payload=encode_payload(kind, fs.bucket_freqs(b.inf, b.sup)),
        )
        for b in hist.buckets
    )
    bits = hist.storage_bits
    if bits is not None:
        bits = bits + len(buckets) * (payload_bits(kind) - payload_bits(hist.estimator))
    return Histogram(buckets=buckets, estimator=kind, storage_bits=bits)


def build(
    fs: FrequencySet,
    method: BuildMethod,
    kind: EstimatorKind = EstimatorKind.CVA,
    *,
    buckets: int | None = None,
    budget_bits: int | None = None,
) -> Histogram:
    """Build + payload attachment, with the count derived from a bit budget."""
    if (buckets is None) == (budget_bits is None):
        raise ConfigError("give exactly one of bucket count or budget bits")
    if buckets is None:
        buckets = budget_to_buckets(budget_bits, method, kind)
    buckets = min(buckets, fs.m)
    hist = _BUILDERS[method](fs, buckets)
    if kind is not EstimatorKind.CVA:
        hist = attach_payloads(hist, fs, kind)
    return hist


def _payload_hex(kind: EstimatorKind, payload: object | None) -> str | None:
    if payload is None:
        return None
    if isinstance(payload, Split2Payload):
        if payload.first_half >= 1 << 32:
            raise ConfigError("stored half sum does not fit the 32-bit wire format")
        return f"{payload.first_half:08x}"
    if isinstance(payload, Split4Payload):
        return bytes(payload.codes).hex()
    if isinstance(payload, Split8Payload):
        word = 0
        for code in payload.codes:
            word = word << 4 | code
        return f"{word:08x}"
    if isinstance(payload, PackedTreeIndex):
        return payload.to_bytes().hex()
    raise ConfigError(f"cannot serialize payload {payload!r}")


def _payload_from_hex(kind: EstimatorKind, text: str | None) -> object | None:
    if text is None:
        return None
    word = int(text, 16)
    if kind is EstimatorKind.SPLIT2:
        return Split2Payload(first_half=word)
    if kind is EstimatorKind.SPLIT4:
        return Split4Payload(codes=tuple(bytes.fromhex(text)))
    if kind is EstimatorKind.SPLIT8:
        return Split8Payload(codes=tuple(word >> shift & 0xF for shift in range(28, -1, -4)))
    if kind in (EstimatorKind.TREE3, EstimatorKind.TREE4):
        return PackedTreeIndex(word=word, levels=3 if kind is EstimatorKind.TREE3 else 4)
    raise ConfigError(f"estimator {kind.value} does not carry a payload")


def histogram_to_json(hist: Histogram) -> dict:
    doc = {
        "estimator": hist.estimator.value,
        "buckets": [
            {
                "inf": b.inf,
                "sup": b.sup,
                "t": b.t,
                "c": b.c,
                "payload_hex": _payload_hex(hist.estimator, b.payload),
            }
            for b in hist.buckets
        ],
    }
    if hist.storage_bits is not None:
        doc["storage_bits"] = hist.storage_bits
    return doc


def histogram_from_json(doc: dict) -> Histogram:
    kind = EstimatorKind.parse(doc["estimator"])
    buckets = tuple(
        Bucket(
            inf=int(b["inf"]),
            sup=int(b["sup"]),
            t=int(b["t"]),
            c=int(b["c"]),
            payload=_payload_from_hex(kind, b.get("payload_hex")),
        )
        for b in doc["buckets"]
    )
    bits = doc.get("storage_bits")
    return Histogram(buckets=buckets, estimator=kind, storage_bits=bits)


def save_histogram(hist: Histogram, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(histogram_to_json(hist), fh, indent=2)
        fh.write("\n")


def load_histogram(path: str) -> Histogram:
    with open(path, encoding="utf-8") as fh:
        return histogram_from_json(json.load(fh))
