"""Prototype-based few-shot event detection."""

from ._core import (
    Dataset,
    Mention,
    ProtoedError,
    Schema,
    Sentence,
    aggregate_runs,
    config_hash,
    distance,
    gen_synthetic,
    greedy_sample,
    method_preset,
    micro_f1,
    preset_names,
    read_corpus,
    run_low_resource,
    sample_train_dev,
    write_corpus,
)

__all__ = [
    "Dataset",
    "Mention",
    "ProtoedError",
    "Schema",
    "Sentence",
    "aggregate_runs",
    "config_hash",
    "distance",
    "gen_synthetic",
    "greedy_sample",
    "method_preset",
    "micro_f1",
    "preset_names",
    "read_corpus",
    "run_low_resource",
    "sample_train_dev",
    "write_corpus",
]
