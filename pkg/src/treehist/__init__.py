"""Bucket histograms for range-query size estimation.

The package implements intra-bucket prefix estimators (plain and uniform
interpolation, split sums, and the 3/4-level packed tree indices), the
EquiSplit / MaxDiff / V-Optimal builders, synthetic data generators, and
the experiment harness that compares estimation errors.
"""
from .core import (
    Bucket,
    ConfigError,
    DomainError,
    EstimatorKind,
    FrequencySet,
    Histogram,
    HistogramError,
    InvariantError,
    RangeQuery,
    Spread,
    delta,
    make_bucket,
    partition_bounds,
    spreads,
)
from .estimators import (
    DecodedTree,
    PackedTreeIndex,
    Split2Payload,
    Split4Payload,
    Split8Payload,
    decode_tree,
    encode_3lt,
    encode_4lt,
    encode_payload,
    encode_split2,
    encode_split4,
    encode_split8,
    estimate_prefix,
    estimate_range,
)
from .builders import (
    BuildMethod,
    attach_payloads,
    bits_per_bucket,
    budget_to_buckets,
    build,
    build_equisplit,
    build_maxdiff,
    build_voptimal,
    histogram_from_json,
    histogram_to_json,
    load_histogram,
    save_histogram,
)
from .evaluation import (
    ErrorReport,
    adversarial_bucket,
    max_abs_error,
    run_bucket_queryset,
    run_histogram_queryset,
    theorem1_bounds,
)

__version__ = "0.1.0"
