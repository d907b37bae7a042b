import json
import math
import random

import pytest

import vragkit


def fcot(prelim, answer):
    return (
        "<Preliminary Visual Analysis>\n" + prelim + "\n</Preliminary Visual Analysis>\n"
        "<RAG Reference Information Analysis>\nrefs\n</RAG Reference Information Analysis>\n"
        "<Fusion, Reasoning, and Decision>\nweigh\n</Fusion, Reasoning, and Decision>\n"
        "<Answer> " + answer + " </Answer>\n"
    )


def bundle(majority, other):
    return vragkit.assemble_bundle(
        "q",
        [
            {"entry_id": "a", "label": majority, "similarity": 0.9, "evidence_text": "x"},
            {"entry_id": "b", "label": majority, "similarity": 0.8, "evidence_text": "y"},
            {"entry_id": "c", "label": other, "similarity": 0.7, "evidence_text": "z"},
        ],
    )


def test_parse_and_canonicalize():
    parsed = vragkit.parse_fcot(fcot("Initial Judgment: Fake", "Real"))
    assert parsed["format_valid"] is True
    assert parsed["answer"] == "Real"
    assert parsed["s1_pred"] == "Fake"
    text = vragkit.canonicalize_fcot(fcot("Initial Judgment: Fake", "Real"))
    assert vragkit.canonicalize_fcot(text) == text
    bad = vragkit.parse_fcot("<Answer> Maybe </Answer>")
    assert bad["format_valid"] is False


def test_conflict_reward_table():
    assert [vragkit.conflict_reward(a, c) for a, c in [(1, 1), (1, 0), (0, 0), (0, 1)]] == [2.0, 1.0, -1.0, -2.0]
    assert vragkit.detect_conflict("Fake", "Real") == 1
    assert vragkit.detect_conflict(None, "Real") == 0


def test_score_rollout_and_batch():
    rec = vragkit.score_rollout(fcot("Initial Judgment: Fake", "Real"), "Real", bundle("Real", "Fake"))
    assert (rec["A"], rec["C"], rec["R_i"]) == (1, 1, 3.0)
    assert vragkit.batch_reward([3.0, 0.0, -1.0]) == pytest.approx(2.0 / 3.0, abs=1e-12)
    assert vragkit.group_advantages([2.0, 0.0]) == [1.0, -1.0]


def test_errors_carry_codes():
    with pytest.raises(vragkit.VragError) as info:
        vragkit.batch_reward([])
    assert info.value.code == "EmptyBatch"
    with pytest.raises(vragkit.VragError):
        vragkit.assemble_bundle("q", [{"entry_id": "a", "label": "Real", "similarity": 0.5, "evidence_text": ""}] * 2)


def test_vector_index_matches_brute_force():
    rng = random.Random(3)
    rows = [[rng.uniform(-1, 1) for _ in range(8)] for _ in range(200)]
    ids = ["e%03d" % i for i in range(200)]
    index = vragkit.VectorIndex(ids, rows)
    assert len(index) == 200
    q = [rng.uniform(-1, 1) for _ in range(8)]

    def cos(a, b):
        return sum(x * y for x, y in zip(a, b)) / math.sqrt(sum(x * x for x in a) * sum(y * y for y in b))

    expected = sorted(ids, key=lambda i: -cos(rows[ids.index(i)], q))[:5]
    assert [h[0] for h in index.top_k(q, 5)] == expected
    assert all(h[0] != "e007" for h in index.top_k(rows[7], 5, exclude="e007"))


def test_metrics():
    frames = [
        {"video_id": "f", "frame_id": "0", "score": 0.9, "ground_truth": "Fake"},
        {"video_id": "r", "frame_id": "0", "score": 0.1, "ground_truth": "Real"},
    ]
    assert vragkit.video_level_auc(frames) == 1.0
    assert vragkit.robustness_rate(34, 32) == pytest.approx(94.12)
    sets = [(34, 32), (429, 417), (534, 520), (1374, 1345), (5226, 5048)]
    assert vragkit.weighted_robustness(sets) == pytest.approx(96.91)
    assert vragkit.cost_ratio([("retrieval", 81), ("inference", 22760)]) == [("retrieval", 0.35), ("inference", 99.65)]
    assert vragkit.cross_judge_average([7.55, 7.78]) == pytest.approx(7.66)
    assert vragkit.parse_judge_reply("accuracy: 3\nfaithfulness: 2\nprofessionalism: 3")["total"] == 8


def test_dataset_helpers():
    assert vragkit.classify_sample(False, True) == "EvidenceGuidedCorrection"
    recipe = vragkit.training_recipe(3)
    assert recipe["epochs"] == 1
    assert recipe["adapter"]["rank"] == 128


def test_mock_pipeline(tmp_path):
    ws = vragkit.write_synthetic_workspace(str(tmp_path / "ws"))
    out = str(tmp_path / "out")
    steps = [["ingest"], ["plan-sample"], ["index"], ["retrieve"], ["classify"], ["build-fcot"],
             ["export-stage", "2"], ["infer"], ["score-rewards"], ["eval"]]
    for step in steps:
        code, _, err = vragkit.run_cli(step + ["--config", str(ws["config"]), "--out", out, "--seed", "7", "--mock"])
        assert code == 0, (step, err)
    summary = json.loads((tmp_path / "out" / "reports" / "eval.json").read_text())
    assert summary["auc"][0]["auc"] == 1.0
    code, _, err = vragkit.run_cli(["retrieve", "--config", str(ws["config"]), "--out", out, "--k", "4"])
    assert code == 1 and "EvenK" in err
