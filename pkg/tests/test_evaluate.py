import json

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from ovdet.data import BBox, Tokenizer, UnifiedRecord
from ovdet.dictionary import ConceptDictionary, ConceptEntry
from ovdet.model import Detection, Detector, ModelConfig, save_checkpoint
from ovdet.training.evaluate import (
    EvalReport,
    average_precision,
    concept_list_input,
    eleven_point_ap,
    evaluate,
    plot_precision_recall,
    random_box_predictions,
    score_detections,
)
from oracles import eleven_point_ap_loop


def record(i, objects):
    return UnifiedRecord(f"im{i}", np.zeros((64, 64, 3), dtype=np.float32), objects, "detection")


RECORDS = [
    record(0, [(BBox(0, 0, 20, 20), "cup"), (BBox(30, 30, 60, 60), "mirror")]),
    record(1, [(BBox(5, 5, 25, 40), "cup")]),
    record(2, []),
]


def perfect(records):
    return [[Detection(b, n, 0.9) for b, n in r.objects] for r in records]


class TestAP:
    def test_perfect(self):
        ap, det, gt = score_detections(RECORDS, perfect(RECORDS), ["cup", "mirror"])
        assert ap == {"cup": 1.0, "mirror": 1.0}
        assert gt == {"cup": 2, "mirror": 1} and det == gt

    def test_empty(self):
        ap, _, _ = score_detections(RECORDS, [[] for _ in RECORDS], ["cup", "mirror"])
        assert ap == {"cup": 0.0, "mirror": 0.0}

    def test_no_ground_truth(self):
        assert average_precision([], {"a": []}) is None

    def test_duplicates_are_false_positives(self):
        gt = {"a": [BBox(0, 0, 10, 10)]}
        dets = [("a", Detection(BBox(0, 0, 10, 10), "x", 0.9)), ("a", Detection(BBox(0, 0, 10, 10), "x", 0.8))]
        assert average_precision(dets, gt) == 1.0  # recall 1 reached at precision 1
        dets.reverse()
        dets[0] = ("a", Detection(BBox(50, 50, 60, 60), "x", 0.95))
        assert average_precision(dets, gt) == pytest.approx(eleven_point_ap_loop([(0.95, 0), (0.9, 1)], 1))

    def test_iou_boundary(self):
        gt = {"a": [BBox(0, 0, 10, 10)]}
        half = Detection(BBox(0, 0, 10, 20), "x", 1.0)  # IoU exactly 0.5
        assert average_precision([("a", half)], gt) == 1.0

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.floats(0, 1), st.booleans()), min_size=1, max_size=30), st.integers(1, 40))
    def test_eleven_point_oracle(self, hits, extra_gt):
        n_gt = sum(h for _, h in hits) + extra_gt
        ranked = sorted(hits, key=lambda t: -t[0])
        tp = np.cumsum([h for _, h in ranked])
        ours = eleven_point_ap(tp / n_gt, tp / np.arange(1, len(ranked) + 1))
        assert ours == pytest.approx(eleven_point_ap_loop(hits, n_gt), abs=1e-12)
        assert 0.0 <= ours <= 1.0

    def test_random_baseline_is_low(self):
        recs = [record(i, [(BBox(10, 10, 30, 30), "cup")]) for i in range(20)]
        ap, _, _ = score_detections(recs, random_box_predictions(recs, ["cup", "mirror"], seed=1), ["cup"])
        assert 0.0 <= ap["cup"] < 0.2


class TestConceptInput:
    def test_enrich_flips_texts(self):
        d = ConceptDictionary([ConceptEntry("person", "a human being")])
        assert concept_list_input(["person"], d, True).concepts == ("person, a human being.",)
        assert concept_list_input(["person"], d, False).concepts == ("person",)

    def test_fallback_logged(self, caplog):
        d = ConceptDictionary([ConceptEntry("person", "a human being")])
        with caplog.at_level("INFO"):
            pin = concept_list_input(["unicorn"], d, True)
        assert pin.concepts == ("unicorn.",) and "unicorn" in caplog.text

    def test_full_list_no_negatives(self):
        pin = concept_list_input(["a", "b", "c"], None, True)
        assert pin.concepts == ("a", "b", "c") and pin.negatives == ()


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    torch.manual_seed(0)
    model = Detector(ModelConfig(), Tokenizer.from_texts(["cup", "mirror", "a drinking vessel"]))
    path = tmp_path_factory.mktemp("ck") / "c.pt"
    save_checkpoint(path, model, {"training_concepts": ["cup"], "step": 3})
    return path


class TestEvaluate:
    def test_report_structure(self, checkpoint):
        d = ConceptDictionary([ConceptEntry("cup", "a drinking vessel")])
        report = evaluate(checkpoint, RECORDS, ["cup", "mirror"], enrich=True, dictionary=d)
        assert report.seen_concepts == ["cup"] and report.unseen_concepts == ["mirror"]
        assert report.config["concept_texts"] == ["cup, a drinking vessel.", "mirror."]
        assert report.config["checkpoint_step"] == 3
        assert all(0.0 <= v <= 1.0 for v in report.per_concept_ap.values())
        assert json.loads(report.to_json())["gt_counts"] == {"cup": 2, "mirror": 1}

    def test_replay_is_exact(self, checkpoint):
        a = evaluate(checkpoint, RECORDS, ["cup", "mirror"], enrich=False, score_thresh=0.0)
        b = evaluate(checkpoint, RECORDS, ["cup", "mirror"], enrich=False, score_thresh=0.0)
        for key in a.per_concept_ap:
            assert abs(a.per_concept_ap[key] - b.per_concept_ap[key]) <= 1e-9
        assert a.to_json() == b.to_json()

    def test_empty_concepts(self, checkpoint):
        with pytest.raises(ValueError):
            evaluate(checkpoint, RECORDS, [])

    def test_plot(self, tmp_path):
        path = tmp_path / "pr.png"
        plot_precision_recall(RECORDS, perfect(RECORDS), ["cup", "mirror"], path)
        assert path.stat().st_size > 0


def test_report_roundtrip():
    r = EvalReport({"a": 0.5}, 0.5, 0.5, None, ["a"], [], {"a": 1}, {"a": 1})
    assert EvalReport(**json.loads(r.to_json())) == r
