"""Acceptance gate: one test per acceptance criterion, each at its stated
tolerance, printing a pass/fail line.

Run with `pytest -v -rA tests/test_acceptance.py` to see one line per
criterion.
"""

from __future__ import annotations

import json
from contextlib import contextmanager

import numpy as np
import pytest
import test_norms as norm_scenarios
from conftest import D1_EXPECTED, D1_TURNS, matches_in_order, replay_d1

from parley import demo
from parley.core import Member
from parley.finance import CdbParams, SavingsParams, roi_cdb, roi_savings
from parley.harness import SimConfig, load_suite, render_summary, run_simulation, summarize
from parley.nlu import (
    Embeddings,
    classify_intent,
    classify_speech_act,
    extract_initial_amount_of_investment,
    extract_period_of_investment,
    frame_parse,
    ingest_tree,
    mean_vector,
    normalize_numbers,
    parse_dependencies,
    tokenize,
)
from parley.norms import load_norms_file
from test_nlu import WIRE_DOC


@contextmanager
def criterion(name: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE FAIL: {name}", flush=True)
        raise
    print(f"ACCEPTANCE PASS: {name}", flush=True)


def test_criterion_1_single_user_dialogue_replay(shared_server):
    with criterion("single-user 10-turn dialogue: all 31 (responder, template) pairs in order, "
                   "each within 30 s, total under 60 s"):
        suite = load_suite(demo.data_path("suites", "d1.json"))
        config = SimConfig(endpoint=shared_server.endpoint, users=1, max_wait_s=30.0)
        report = run_simulation(suite, config)
        assert report.passed, report.failures()
        assert len(report.records) == 31
        assert [r.response_id for r in report.records] == list(range(1, 32))
        assert all(r.latency_ms <= 30_000 for r in report.records)
        assert report.wall_time_s < 60.0
        assert report.connection_errors == []


def test_criterion_2_eight_concurrent_users(shared_server, tmp_path):
    with criterion("8 concurrent users complete the dialogue within 240 s per response, "
                   "zero cross-group deliveries, per-response latency table emitted"):
        suite = load_suite(demo.data_path("suites", "d1.json"))
        config = SimConfig(endpoint=shared_server.endpoint, users=8, max_wait_s=240.0)
        report = run_simulation(suite, config)
        assert report.passed, report.failures()
        assert len(report.records) == 8 * 31
        assert report.leaked_frames == 0
        # isolation: every group saw exactly the single-user utterance count
        counts = set(report.utterances_per_group.values())
        assert len(report.utterances_per_group) == 8
        assert len(counts) == 1
        rows = summarize(report)
        assert [row.response_id for row in rows] == list(range(1, 32))
        assert all(row.count == 8 for row in rows)
        assert all(row.min_ms <= row.median_ms <= row.max_ms for row in rows)
        out = tmp_path / "report.json"
        out.write_text(json.dumps({"summary": [vars(r) for r in rows]}))
        assert out.stat().st_size > 0
        print(render_summary(rows))


def test_criterion_3_frame_parsing_exactness():
    with criterion("frame parsing: placeholder strings exact, conversion digits exact"):
        first = normalize_numbers("I would like to invest 10 thousands in 3 years")
        parsed = frame_parse(first, parse_dependencies(first.converted))
        assert parsed.canonical_text == "I would like to invest #v in #dt years"

        second = normalize_numbers("10 in 3 years")
        parsed2 = frame_parse(second, parse_dependencies(second.converted))
        assert parsed2.canonical_text == "#v in #dt years"

        listing = normalize_numbers(WIRE_DOC["original"])
        assert listing.digits == [10000, 40]
        assert listing.converted == WIRE_DOC["converted"]


def test_criterion_4_tree_extraction_rules():
    with criterion("period/amount extraction returns the 40 and 10000 nodes on the "
                   "reference tree and never the same node on any fixture"):
        tree = ingest_tree(WIRE_DOC)
        period = extract_period_of_investment(tree)
        amount = extract_initial_amount_of_investment(tree)
        assert period is not None and period.token == "40"
        assert amount is not None and amount.token == "10000"
        assert period is not amount

        fixtures = [
            WIRE_DOC["converted"],
            "i would like to invest 50 in 6 months",
            "so i want to invest 10000 in 2 years",
            "what if i invest 10000 in 5 years?",
            "how about 15 years?",
            "and 500000?",
            "I want to invest in 50000 for 15 years in CDB",
            "apply 500 for 3 years",
            "wait 3 years",
            "invest 10000",
            "move 100 to 200",
            "hello",
        ]
        for text in fixtures:
            t = parse_dependencies(text)
            p = extract_period_of_investment(t)
            a = extract_initial_amount_of_investment(t)
            assert p is None or a is None or p is not a, text


def test_criterion_5_roi_formulas():
    with criterion("return-of-investment formulas: identity cases exact, hand-derived "
                   "values within 1e-9 relative, monotone in the invested amount over "
                   "1000 random parameter draws"):
        # identities, exact
        assert roi_savings(1234.5, SavingsParams(0.0, 0.0)) == 1234.5
        for days in (1, 7, 365):
            assert roi_cdb(1000.0, CdbParams(0.0, 1.0, days, 0.0)) == 1000.0
            assert roi_cdb(1000.0, CdbParams(0.1, 1.0, days, 0.0)) == pytest.approx(1100.0, rel=1e-12)
        # hand-derived examples at 1e-9 relative
        assert roi_savings(1000, SavingsParams(0.05, 0.01)) == pytest.approx(1060, rel=1e-9)
        assert roi_savings(30000, SavingsParams(1 / 12, 0.0)) == pytest.approx(32500, rel=1e-9)
        assert roi_cdb(1000, CdbParams(0.1, 1.02, 2, 10.0)) == pytest.approx(1094.04, rel=1e-9)
        # monotonicity over a randomized grid
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            iv_low = rng.uniform(1, 1e6)
            iv_high = iv_low + rng.uniform(0.01, 1e5)
            savings = SavingsParams(rng.uniform(0, 0.5), rng.uniform(0, 0.2))
            cdb = CdbParams(
                interbank_rate=rng.uniform(0, 0.3),
                paid_fraction=rng.uniform(0.9, 1.2),
                days=int(rng.integers(1, 4000)),
                income_tax=rng.uniform(0, 50),
            )
            assert roi_savings(iv_high, savings) > roi_savings(iv_low, savings)
            assert roi_cdb(iv_high, cdb) > roi_cdb(iv_low, cdb)


def test_criterion_6_norm_scenarios():
    with criterion("interaction norms: one scenario per rule row (18 rows), each firing "
                   "its directives and nothing else"):
        norm_set = load_norms_file(demo.data_path("norms.json"))
        assert len(norm_set) == 18
        instance = norm_scenarios.TestRowScenarios()
        methods = sorted(m for m in dir(instance) if m.startswith("test_row"))
        rows_covered = {m.split("_")[1] for m in methods}
        assert len(rows_covered) == 18
        for method in methods:
            getattr(instance, method)(norm_set)
            print(f"  norm scenario ok: {method}", flush=True)


def test_criterion_7_intent_classifier_properties():
    with criterion("1NN intent classifier: distance 0 and true class on every training "
                   "sample; leave-one-out accuracy 100% on well-separated clusters"):
        # packaged training set: each sample classifies to itself at distance 0
        embeddings = Embeddings.load(demo.data_path("embeddings.txt"))
        from parley.nlu import TrainingSet

        trainset = TrainingSet.load(demo.data_path("trainset.jsonl"), embeddings)
        for sample in trainset.samples:
            vec = mean_vector(tokenize(sample.text), embeddings)
            vec = vec / np.linalg.norm(vec)
            prediction = classify_intent(vec, trainset)
            assert prediction.distance == pytest.approx(0.0, abs=1e-12)
            assert prediction.intent_class == sample.intent_class, sample.text

        # synthetic 5 classes x 10 samples, separation >= 10x intra radius
        from parley.nlu import TrainingSample

        rng = np.random.default_rng(99)
        dim, radius, separation = 12, 4.0, 40.0
        labeled: list[tuple[str, np.ndarray]] = []
        centers = rng.normal(scale=1.0, size=(5, dim))
        centers = centers / np.linalg.norm(centers, axis=1, keepdims=True)
        centers *= separation * np.arange(1, 6)[:, None]
        for c in range(5):
            for _ in range(10):
                offset = rng.normal(size=dim)
                offset = offset / np.linalg.norm(offset) * rng.uniform(0, radius)
                labeled.append((f"class{c}", centers[c] + offset))
        # verify the stated geometry before using it
        for i in range(5):
            for j in range(i + 1, 5):
                assert np.linalg.norm(centers[i] - centers[j]) >= 10 * radius

        correct = 0
        for i, (label, vec) in enumerate(labeled):
            rest = [
                TrainingSample(f"s{k}", lab, np.asarray(v, dtype=float))
                for k, (lab, v) in enumerate(labeled)
                if k != i
            ]
            ts = TrainingSet(rest, dim)
            correct += classify_intent(np.asarray(vec), ts).intent_class == label
        assert correct == 50  # 100% leave-one-out


def test_criterion_8_speech_act_fixtures():
    with criterion("speech-act fixture set classifies 100% to its labels"):
        from parley.nlu import SpeechActRules

        rules = SpeechActRules.load(demo.data_path("corpus", "speech_acts.json"))
        with open(demo.data_path("corpus", "speech_act_fixtures.jsonl"), "r", encoding="utf-8") as fh:
            fixtures = [json.loads(line) for line in fh if line.strip()]
        assert len(fixtures) == 19
        hits = 0
        for fixture in fixtures:
            converted = normalize_numbers(fixture["text"]).converted
            got = classify_speech_act(converted, rules)
            assert got == fixture["speech_act"], f"{fixture['text']!r} -> {got}"
            hits += 1
        assert hits == len(fixtures)


def test_criterion_9_context_round_trip_mid_dialogue():
    with criterion("context snapshot/restore mid-dialogue: slot map and log counter "
                   "exact, replay completes the dialogue identically"):
        original = demo.load_profile()
        group, _ = replay_d1(original.hub, turns=D1_TURNS[:4])
        blob = original.services.context.snapshot(group.id)
        slots = dict(original.services.context.group(group.id).frame.as_dict())
        log_seq = original.services.context.group(group.id).log_seq
        _, tail_original = replay_d1(original.hub, turns=D1_TURNS[4:], group=group)

        restored = demo.load_profile()
        ctx = restored.services.context.restore(blob)
        assert ctx.frame.as_dict() == slots
        assert ctx.log_seq == log_seq

        fresh = restored.hub.create_group(Member("alice", "User", "user", "human"), group.id + "-r")
        for name, value in ctx.frame.as_dict().items():
            restored.services.context.put_slot(fresh.id, name, value, writer="restore")
        _, tail_restored = replay_d1(restored.hub, turns=D1_TURNS[4:], group=fresh)
        assert tail_restored == tail_original
        for turn_index, expected in enumerate(D1_EXPECTED[4:]):
            assert matches_in_order(tail_restored[turn_index], expected)
