import json
import os
import subprocess

import pytest

import protoed


def small_pool(seed=1, n=80):
    return protoed.gen_synthetic(n_types=3, n_sentences=n, vocab_size=20, seed=seed)


def test_synthetic_and_sampling():
    pool = small_pool()
    assert len(pool) == 80
    assert len(pool.schema) == 3
    train, dev = protoed.sample_train_dev(pool, 2, 1, 5)
    counts = {}
    for s in train.sentences:
        for m in s.mentions:
            counts[m.label] = counts.get(m.label, 0) + 1
    assert set(counts) == set(pool.schema.types)
    assert min(counts.values()) >= 2
    assert not {s.id for s in train.sentences} & {s.id for s in dev.sentences}


def test_infeasible_sample_raises():
    pool = small_pool(n=3)
    with pytest.raises(protoed.ProtoedError, match="infeasible"):
        protoed.greedy_sample(pool, 50, 0)


def test_metrics_and_distance():
    gold = [protoed.Sentence("a", ["x", "y"], [protoed.Mention(0, 1, "A")])]
    assert protoed.micro_f1(gold, gold)["f1"] == 1.0
    empty = [protoed.Sentence("a", ["x", "y"])]
    assert protoed.micro_f1(empty, gold)["recall"] == 0.0
    assert protoed.distance([0.0, 0.0], [3.0, 4.0], "EU") == pytest.approx(5.0)
    mean, std = protoed.aggregate_runs([0.5, 0.7, 0.9])
    assert mean == pytest.approx(0.7) and std == pytest.approx(0.2)
    assert protoed.aggregate_runs([0.3])[1] is None


def test_presets_and_hash():
    names = protoed.preset_names()
    assert "unified-baseline" in names and "protonet-adj" in names
    assert protoed.method_preset("protonet-adj")["distance"] == "SEU"
    h = protoed.config_hash({"method": "protonet", "steps": "10"})
    assert h == protoed.config_hash({"method": "protonet", "steps": "10"})
    with pytest.raises(protoed.ProtoedError):
        protoed.method_preset("nope")


def test_train_and_evaluate():
    pool = small_pool()
    test = small_pool(seed=2, n=30)
    train, dev = protoed.sample_train_dev(pool, 2, 1, 1)
    cfg = {"method": "unified-baseline", "lr": "0.01", "steps": "5", "buckets": "64", "dim": "8"}
    r = protoed.run_low_resource(train, dev, test, cfg, seed=3)
    assert 0.0 <= r["f1"] <= 1.0
    assert len(r["predictions"]) == len(test)
    again = protoed.run_low_resource(train, dev, test, cfg, seed=3)
    assert again["f1"] == r["f1"]


def test_corpus_round_trip(tmp_path):
    pool = small_pool(n=10)
    path = str(tmp_path / "c.jsonl")
    protoed.write_corpus(path, pool)
    back = protoed.read_corpus(path)
    assert [s.tokens for s in back.sentences] == [s.tokens for s in pool.sentences]


@pytest.mark.skipif("PROTOED_CLI" not in os.environ, reason="CLI path not provided")
def test_cli_error_line(tmp_path):
    r = subprocess.run([os.environ["PROTOED_CLI"], "eval", "--pred", "missing", "--gold", "missing"],
                       capture_output=True, text=True, cwd=tmp_path)
    assert r.returncode != 0
    err = json.loads(r.stderr.strip().splitlines()[-1])
    assert err["error"] == "io"
