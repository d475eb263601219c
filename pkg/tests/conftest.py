"""Shared independent oracles for the test suite.

Everything here is written as a literal, loop-based transcription of the
published formulas, deliberately avoiding the vectorized / bit-twiddling
code paths of the package so the two routes check each other.
"""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import combinations

import numpy as np

from treehist.core import EstimatorKind


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def part_range(b: int, j: int, i: int) -> tuple[int, int]:
    """Restated sub-range formula: x = 1 + ceil(b/j*(i-1)), y = ceil(b/j*i)."""
    return 1 + math.ceil(b / j * (i - 1)), math.ceil(b / j * i)


def part_sum(freqs, j: int, i: int) -> int:
    x, y = part_range(len(freqs), j, i)
    return int(sum(freqs[x - 1 : y]))


def quantize_exact(num: int, den: int, max_code: int) -> int:
    """<num/den * max_code> with halves away from zero, in exact rationals."""
    if den == 0:
        return 0
    x = Fraction(num * max_code, den)
    return math.floor(x + Fraction(1, 2))


def _split_sums(freqs, j: int, width: int) -> list[float]:
    """Decoded part sums of a j-way split with `width`-bit codes."""
    c = int(sum(freqs))
    max_code = (1 << width) - 1
    return [quantize_exact(part_sum(freqs, j, i), c, max_code) / max_code * c for i in range(1, j + 1)]


def _piecewise(freqs, j: int, sums, d: int) -> float:
    """Walk the parts left to right: full sums plus a linear tail piece."""
    b = len(freqs)
    total = 0.0
    for i in range(1, j + 1):
        x, y = part_range(b, j, i)
        if y <= d:
            total += sums[i - 1]
        elif x <= d:
            total += (d - x + 1) / (y - x + 1) * sums[i - 1]
    return total


def _split_estimate(freqs, j: int, sums, d: int) -> float:
    """Piecewise estimate with the complementary rule for d beyond b/2.

    The suffix estimate walks the same fixed parts from the right: parts
    fully inside [d+1, b] contribute their whole sum, the one containing
    d+1 contributes its right fraction.
    """
    b = len(freqs)
    c = float(sum(freqs))
    if 2 * d <= b:
        return _piecewise(freqs, j, sums, d)
    suffix = 0.0
    for i in range(1, j + 1):
        x, y = part_range(b, j, i)
        if x > y:
            continue
        if x >= d + 1:
            suffix += sums[i - 1]
        elif y >= d + 1:
            suffix += (y - d) / (y - x + 1) * sums[i - 1]
    return c - suffix


def decode_3lt_naive(c: float, codes) -> dict[str, float]:
    l12, l14, l34 = codes
    h1 = l12 / 2047 * c
    h2 = c - h1
    q1 = l14 / 1023 * h1
    q3 = l34 / 1023 * h2
    return {"h1": h1, "h2": h2, "q1": q1, "q2": h1 - q1, "q3": q3, "q4": h2 - q3}


def decode_4lt_naive(c: float, codes) -> dict[str, float]:
    l12, l14, l34, l18, l38, l58, l78 = codes
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
    return {
        "h1": h1, "h2": h2,
        "q1": q1, "q2": q2, "q3": q3, "q4": q4,
        "e": [e1, q1 - e1, e3, q2 - e3, e5, q3 - e5, e7, q4 - e7],
    }


def codes_3lt_naive(freqs) -> tuple[int, int, int]:
    c = int(sum(freqs))
    d12 = part_sum(freqs, 2, 1)
    return (
        quantize_exact(d12, c, 2047),
        quantize_exact(part_sum(freqs, 4, 1), d12, 1023),
        quantize_exact(part_sum(freqs, 4, 3), c - d12, 1023),
    )


def codes_4lt_naive(freqs) -> tuple[int, ...]:
    c = int(sum(freqs))
    d12 = part_sum(freqs, 2, 1)
    q = [part_sum(freqs, 4, i) for i in range(1, 5)]
    e = [part_sum(freqs, 8, i) for i in (1, 3, 5, 7)]
    return (
        quantize_exact(d12, c, 63),
        quantize_exact(q[0], d12, 31),
        quantize_exact(q[2], c - d12, 31),
        quantize_exact(e[0], q[0], 15),
        quantize_exact(e[1], q[1], 15),
        quantize_exact(e[2], q[2], 15),
        quantize_exact(e[3], q[3], 15),
    )


def _tree_estimate_3lt(freqs, d: int) -> float:
    b = len(freqs)
    c = int(sum(freqs))
    dec = decode_3lt_naive(c, codes_3lt_naive(freqs))
    if d == b:
        return float(c)
    quarters = [dec["q1"], dec["q2"], dec["q3"], dec["q4"]]
    for i in range(1, 5):
        lo, hi = math.ceil((i - 1) / 4 * b), math.ceil(i / 4 * b)
        if lo <= d < hi:
            p = dec["h1"] if i > 2 else 0.0
            p2 = dec["q1"] if i == 2 else (dec["q3"] if i == 4 else 0.0)
            return p + p2 + (d - lo) / (hi - lo) * quarters[i - 1]
    raise AssertionError("no quarter segment found")


def _tree_estimate_4lt(freqs, d: int) -> float:
    b = len(freqs)
    c = int(sum(freqs))
    dec = decode_4lt_naive(c, codes_4lt_naive(freqs))
    if d == b:
        return float(c)
    eighths = dec["e"]
    for i in range(1, 9):
        lo, hi = math.ceil((i - 1) / 8 * b), math.ceil(i / 8 * b)
        if lo <= d < hi:
            p = dec["h1"] if i > 4 else 0.0
            p2 = dec["q1"] if i in (3, 4) else (dec["q3"] if i in (7, 8) else 0.0)
            p3 = eighths[i - 2] if i % 2 == 0 else 0.0
            return p + p2 + p3 + (d - lo) / (hi - lo) * eighths[i - 1]
    raise AssertionError("no eighth segment found")


def naive_estimate(kind: EstimatorKind, freqs, d: int) -> float:
    """Formula-literal prefix estimate used as the implementation oracle."""
    b = len(freqs)
    c = int(sum(freqs))
    t = int(np.count_nonzero(np.asarray(freqs)))
    if d == 0:
        return 0.0
    if kind is EstimatorKind.CVA:
        return d / b * c
    if kind is EstimatorKind.USA:
        span = b - 1 if b > 1 else 1
        return (1 + (t - 1) * (d - 1) / span) * c / t
    if kind is EstimatorKind.ONE_BIASED:
        span = b - 1 if b > 1 else 1
        return d / span * (t - 1) / t * c
    if kind is EstimatorKind.SPLIT2:
        d12 = part_sum(freqs, 2, 1)
        return _split_estimate(freqs, 2, [float(d12), float(c - d12)], d)
    if kind is EstimatorKind.SPLIT4:
        return _split_estimate(freqs, 4, _split_sums(freqs, 4, 8), d)
    if kind is EstimatorKind.SPLIT8:
        return _split_estimate(freqs, 8, _split_sums(freqs, 8, 4), d)
    if kind is EstimatorKind.TREE3:
        return _tree_estimate_3lt(freqs, d)
    return _tree_estimate_4lt(freqs, d)


def exact_sse(freqs, edges) -> Fraction:
    """Total SSE of the partition given by right edges, in exact rationals."""
    total = Fraction(0)
    lo = 1
    for hi in edges:
        seg = [Fraction(int(f)) for f in freqs[lo - 1 : hi]]
        n = len(seg)
        s = sum(seg)
        total += sum(x * x for x in seg) - s * s / n
        lo = hi + 1
    return total


def brute_voptimal_sse(freqs, h: int) -> Fraction:
    """Minimum total SSE over every partition into at most h buckets."""
    m = len(freqs)
    best = None
    for k in range(1, min(h, m) + 1):
        for cuts in combinations(range(1, m), k - 1):
            sse = exact_sse(freqs, list(cuts) + [m])
            if best is None or sse < best:
                best = sse
    return best


def brute_maxdiff_cuts(freqs, h: int) -> list[int]:
    """Top-(h-1) signed adjacent area differences, leftmost ties first.

    Returns 0-based positions i such that a boundary separates the i-th and
    (i+1)-th non-null values.
    """
    vals = [i + 1 for i, f in enumerate(freqs) if f > 0]
    areas = []
    for pos, v in enumerate(vals):
        gap = vals[pos + 1] - v if pos + 1 < len(vals) else 1
        areas.append(freqs[v - 1] * gap)
    diffs = [areas[i + 1] - areas[i] for i in range(len(areas) - 1)]
    ranked = sorted(range(len(diffs)), key=lambda i: (-diffs[i], i))
    return sorted(ranked[: h - 1])
