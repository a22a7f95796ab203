import itertools

import numpy as np
import pytest

from vtforge.dataio import FrameRecord, TextInstance, VideoAnnotation
from vtforge.geometry import polygon_iou
from vtforge.tracker import (AssocConfig, Tracker, consensus_transcription,
                             levenshtein, normalized_edit_distance,
                             run_sequence)

from conftest import annotation, quad


def det(polygon, text):
    return TextInstance(id=1, polygon=polygon, transcription=text)


class TestEditDistance:
    def test_levenshtein_known(self):
        assert levenshtein("kitten", "sitting") == 3
        assert levenshtein("", "abc") == 3
        assert levenshtein("abc", "abc") == 0

    def test_normalized(self):
        assert normalized_edit_distance("ab", "ab") == 0.0
        assert normalized_edit_distance("ab", "xy") == 1.0
        assert normalized_edit_distance("", "") == 0.0


class TestConsensus:
    def test_identical_observations(self):
        for k in (1, 2, 5):
            assert consensus_transcription(["word"] * k) == "word"

    def test_majority_vote_per_position(self):
        assert consensus_transcription(["ab", "ab", "xb"]) == "ab"
        assert consensus_transcription(["cat", "bat", "bat"]) == "bat"

    def test_tie_breaks_to_earliest(self):
        assert consensus_transcription(["ab", "xy"]) == "ab"
        assert consensus_transcription(["abc", "ab", "abcd"]) == "abc"


class TestStep:
    def test_static_box_keeps_id(self):
        tracker = Tracker()
        box = quad(10, 10, 30, 12)
        ids = [tracker.step([det(box, "hello")]) for _ in range(3)]
        assert all(assignment[0] == 1 for assignment in ids)

    def test_swap_follows_transcription(self):
        # boxes A and B overlap enough that the cross pairing clears the
        # gate; text distance then dominates at text_weight 0.5
        box_a = quad(0, 0, 10, 10)
        box_b = quad(4, 0, 10, 10)
        cfg = AssocConfig()
        tracker = Tracker(cfg)
        first = tracker.step([det(box_a, "AB"), det(box_b, "XY")])
        id_ab = first[0]
        id_xy = first[1]
        # positions swap, transcriptions travel with the instances
        second = tracker.step([det(box_a, "XY"), det(box_b, "AB")])
        assert second[0] == id_xy
        assert second[1] == id_ab
        # exhaustive check: the chosen pairing is the cheaper of the two
        iou_same = polygon_iou(box_a, box_a)
        iou_cross = polygon_iou(box_a, box_b)
        stay = 2 * ((1 - iou_same) * 0.5 + 1.0 * 0.5)
        follow = 2 * ((1 - iou_cross) * 0.5 + 0.0 * 0.5)
        assert follow < stay

    def test_gap_resume_same_id(self):
        tracker = Tracker(AssocConfig(patience=5))
        box = quad(50, 50, 20, 10)
        first = tracker.step([det(box, "w")])
        assert first[0] == 1
        tracker.step([])
        tracker.step([])
        resumed = tracker.step([det(quad(51, 50, 20, 10), "w")])
        assert resumed[0] == 1

    def test_termination_past_patience_new_id(self):
        tracker = Tracker(AssocConfig(patience=1))
        box = quad(50, 50, 20, 10)
        assert tracker.step([det(box, "w")])[0] == 1
        tracker.step([])
        tracker.step([])  # miss_count 2 > patience 1 -> terminated
        assert tracker.step([det(box, "w")])[0] == 2

    def test_ids_never_reused(self):
        tracker = Tracker(AssocConfig(patience=0))
        seen = set()
        for k in range(5):
            box = quad(100 * k, 10, 20, 10)  # disjoint every frame
            assignment = tracker.step([det(box, "w")])
            seen.add(assignment[0])
            tracker.step([])
            tracker.step([])
        assert seen == {1, 2, 3, 4, 5}

    def test_order_invariance(self, rng):
        def build(order_flip):
            tracker = Tracker()
            out = []
            for k in range(6):
                dets = [det(quad(10 + 3 * k, 10, 20, 10), "aa"),
                        det(quad(100 - 2 * k, 40, 18, 9), "bb"),
                        det(quad(200, 80 + 4 * k, 22, 11), "cc")]
                if order_flip:
                    dets = dets[::-1]
                assignment = tracker.step(dets)
                if order_flip:
                    assignment = {len(dets) - 1 - i: v
                                  for i, v in assignment.items()}
                out.append(tuple(sorted(assignment.items())))
            return out

        assert build(False) == build(True)

    def test_reduces_to_pure_iou_assignment(self, rng):
        cfg = AssocConfig(iou_gate=0.0, text_weight=0.0, cost_threshold=1.0)
        for trial in range(20):
            n = int(rng.integers(2, 6))
            boxes0 = [quad(float(rng.uniform(0, 200)), float(rng.uniform(0, 200)),
                           20, 12) for _ in range(n)]
            tracker = Tracker(cfg)
            first = tracker.step([det(b, "t") for b in boxes0])
            track_polys = {tid: boxes0[i] for i, tid in first.items()}
            boxes1 = [quad(b.vertices[0].x + float(rng.uniform(-8, 8)),
                           b.vertices[0].y + float(rng.uniform(-6, 6)),
                           20, 12) for b in boxes0]
            second = tracker.step([det(b, "t") for b in boxes1])
            got_total = sum(polygon_iou(track_polys[tid], boxes1[i])
                            for i, tid in second.items() if tid in track_polys)
            tids = sorted(track_polys)
            best_total = max(
                sum(polygon_iou(track_polys[tids[p[i]]], boxes1[i])
                    for i in range(n))
                for p in itertools.permutations(range(n)))
            assert got_total == pytest.approx(best_total, abs=1e-9)


class TestRunSequence:
    def test_empty_sequence(self):
        ann = VideoAnnotation(video_id="v", frames=[])
        out = run_sequence(ann)
        assert out.frames == []

    def test_moving_instance_single_id(self):
        frames = {k: [(7, quad(10 + 2 * k, 10, 30, 12), "go")] for k in range(10)}
        out = run_sequence(annotation("v", frames))
        ids = {inst.id for f in out.frames for inst in f.instances}
        assert ids == {1}
        assert all(len(f.instances) == 1 for f in out.frames)

    def test_two_parallel_instances_two_ids(self):
        frames = {k: [(1, quad(10, 10, 30, 12), "aa"),
                      (2, quad(10, 100, 30, 12), "bb")] for k in range(5)}
        out = run_sequence(annotation("v", frames))
        ids = {inst.id for f in out.frames for inst in f.instances}
        assert ids == {1, 2}

    def test_noncontiguous_frames_rejected(self):
        ann = annotation("v", {0: [(1, quad(0, 0, 5, 5), "a")],
                               2: [(1, quad(0, 0, 5, 5), "a")]})
        with pytest.raises(ValueError):
            run_sequence(ann)

    def test_consensus_transcription_emitted(self):
        frames = {0: [(1, quad(10, 10, 30, 12), "cat")],
                  1: [(1, quad(10, 10, 30, 12), "bat")],
                  2: [(1, quad(10, 10, 30, 12), "bat")]}
        out = run_sequence(annotation("v", frames))
        assert out.frames[2].instances[0].transcription == "bat"
