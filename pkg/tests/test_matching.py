import itertools
import math

import numpy as np
import pytest

from vtforge.geometry import AABox, Polygon
from vtforge.matching import (GroundTruthRecord, MatchWeights, PredictionRecord,
                              box_cost, cost_matrix, focal_term, hungarian,
                              polygon_l1, recognition_ce, set_loss)

from conftest import quad


class TestFocal:
    def test_perfect_confidence(self):
        assert focal_term(1.0, positive=True) == 0.0

    def test_positive_half(self):
        assert focal_term(0.5, positive=True) == pytest.approx(
            0.25 * 0.25 * math.log(2), abs=1e-12)
        assert focal_term(0.5, positive=True) == pytest.approx(0.0433217, abs=1e-6)

    def test_negative_half(self):
        assert focal_term(0.5, positive=False) == pytest.approx(
            0.75 * 0.25 * math.log(2), abs=1e-12)
        assert focal_term(0.5, positive=False) == pytest.approx(0.1299651, abs=1e-6)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            focal_term(1.5, positive=True)
        with pytest.raises(ValueError):
            focal_term(-0.1, positive=False)

    def test_monotonicity(self):
        ps = np.linspace(0.01, 0.99, 99)
        pos = [focal_term(p, True) for p in ps]
        neg = [focal_term(p, False) for p in ps]
        assert all(a > b for a, b in zip(pos, pos[1:]))
        assert all(a < b for a, b in zip(neg, neg[1:]))


class TestBoxCost:
    def test_identity(self):
        b = AABox(0.1, 0.1, 0.4, 0.3)
        assert box_cost(b, b) == 0.0

    def test_hand_computed(self):
        cost = box_cost(AABox(0, 0, 0.2, 0.2), AABox(0.1, 0.1, 0.3, 0.3))
        expect = 5 * 0.2 + 2 * (1 + 5 / 63)
        assert cost == pytest.approx(expect, abs=1e-9)
        assert cost == pytest.approx(3.158730, abs=1e-6)

    def test_far_apart_giou_limit(self):
        a = AABox(0.0, 0.0, 0.001, 0.001)
        b = AABox(0.999, 0.999, 1.0, 1.0)
        l1 = abs(0.0005 - 0.9995) * 2
        cost = box_cost(a, b)
        # giou term approaches its upper bound of 2*lambda_giou
        assert cost == pytest.approx(5 * l1 + 2 * 2, abs=1e-2)


class TestRecognitionCE:
    def test_one_hot_correct(self):
        alphabet = "abc#"
        dists = [[1.0, 0, 0, 0], [0, 1.0, 0, 0]]
        assert recognition_ce(dists, "ab", alphabet, pad_symbol="#") == 0.0

    def test_uniform_is_log4(self):
        alphabet = "abc#"
        dists = [[0.25] * 4] * 6
        value = recognition_ce(dists, "cab", alphabet, pad_symbol="#")
        assert value == pytest.approx(math.log(4), abs=1e-12)

    def test_missing_symbol_errors(self):
        with pytest.raises(ValueError):
            recognition_ce([[0.5, 0.5]], "z", "ab")

    def test_zero_probability_clamped_with_warning(self):
        alphabet = "ab"
        with pytest.warns(RuntimeWarning):
            value = recognition_ce([[0.0, 1.0]], "a", alphabet, pad_symbol="b")
        assert value == pytest.approx(-math.log(1e-12))

    def test_padding_positions_counted(self):
        alphabet = "ab#"
        # 3 distributions, 1-char text: positions 2..3 target the pad symbol
        dists = [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]
        assert recognition_ce(dists, "a", alphabet, pad_symbol="#") == 0.0


class TestPolygonL1:
    def test_identity(self):
        p = quad(0, 0, 1, 1)
        assert polygon_l1(p, p) == 0.0

    def test_hand_computed_shift(self):
        a = quad(0, 0, 1, 1)
        b = quad(0.1, 0, 1, 1)
        assert polygon_l1(a, b) == pytest.approx(0.05, abs=1e-12)

    def test_count_mismatch(self):
        a = quad(0, 0, 1, 1)
        b = Polygon([(0, 0), (1, 0), (0.5, 1)])
        with pytest.raises(ValueError):
            polygon_l1(a, b)


class TestCostMatrix:
    def test_perfect_match_zero(self):
        gt = GroundTruthRecord(box=AABox(0, 0, 0.5, 0.5),
                               polygon=quad(0, 0, 0.5, 0.5), transcription="hi")
        pred = PredictionRecord(class_prob=1.0, box=AABox(0, 0, 0.5, 0.5))
        m = cost_matrix([pred], [gt])
        assert m[0, 0] == 0.0

    def test_box_dominates_at_equal_confidence(self):
        gt = GroundTruthRecord(box=AABox(0, 0, 0.2, 0.2),
                               polygon=quad(0, 0, 0.2, 0.2), transcription="x")
        pred_exact = PredictionRecord(class_prob=0.9, box=AABox(0, 0, 0.2, 0.2))
        pred_shifted = PredictionRecord(class_prob=0.9, box=AABox(0.1, 0.1, 0.3, 0.3))
        m = cost_matrix([pred_exact, pred_shifted], [gt])
        assert m[0, 0] < m[0, 1]

    def test_component_sum(self):
        w = MatchWeights()
        gt_text = GroundTruthRecord(box=AABox(0, 0, 0.2, 0.2),
                                    polygon=quad(0, 0, 0.2, 0.2), transcription="x")
        gt_empty = GroundTruthRecord.no_object()
        pred_a = PredictionRecord(class_prob=0.5, box=AABox(0.1, 0.1, 0.3, 0.3))
        pred_b = PredictionRecord(class_prob=0.9, box=AABox(0, 0, 0.2, 0.2))
        m = cost_matrix([pred_a, pred_b], [gt_text, gt_empty], w)
        expect_00 = 2.0 * focal_term(0.5, True) + box_cost(pred_a.box, gt_text.box, w)
        expect_01 = 2.0 * focal_term(0.9, True) + box_cost(pred_b.box, gt_text.box, w)
        assert m[0, 0] == pytest.approx(expect_00, abs=1e-12)
        assert m[0, 1] == pytest.approx(expect_01, abs=1e-12)
        assert m[1, 0] == pytest.approx(2.0 * focal_term(0.5, False), abs=1e-12)
        assert m[1, 1] == pytest.approx(2.0 * focal_term(0.9, False), abs=1e-12)

    def test_nonnegative_entries(self, rng):
        for _ in range(50):
            gts = [GroundTruthRecord(box=AABox(0, 0, *rng.uniform(0.1, 1, 2)),
                                     polygon=quad(0, 0, 0.5, 0.5),
                                     transcription="t")
                   for _ in range(int(rng.integers(1, 4)))]
            preds = [PredictionRecord(class_prob=float(rng.uniform(0.01, 0.99)),
                                      box=AABox(0, 0, *rng.uniform(0.1, 1, 2)))
                     for _ in range(int(rng.integers(1, 4)))]
            assert cost_matrix(preds, gts).min() >= 0.0


class TestHungarian:
    def test_two_by_two_examples(self):
        assign, total = hungarian([[1.0, 2.0], [3.0, 1.0]])
        assert assign == [0, 1] and total == 2.0
        assign, total = hungarian([[4.0, 1.0], [2.0, 3.0]])
        assert assign == [1, 0] and total == 3.0

    def test_zero_diagonal(self):
        m = [[0.0, 5.0, 5.0], [5.0, 0.0, 5.0], [5.0, 5.0, 0.0]]
        assign, total = hungarian(m)
        assert assign == [0, 1, 2] and total == 0.0

    def test_matches_brute_force(self, rng):
        for _ in range(400):
            n = int(rng.integers(1, 8))
            m = int(rng.integers(n, 8))
            cost = rng.random((n, m)) * 10
            assign, total = hungarian(cost)
            assert sorted(set(assign)) == sorted(assign)  # injective
            best = min(math.fsum(cost[i, p[i]] for i in range(n))
                       for p in itertools.permutations(range(m), n))
            assert total == best

    def test_lexicographic_tie_break(self):
        assign, total = hungarian(np.zeros((3, 5)))
        assert assign == [0, 1, 2] and total == 0.0
        # two optimal assignments with equal totals: pick lexicographic min
        m = np.array([[1.0, 1.0], [1.0, 1.0]])
        assert hungarian(m)[0] == [0, 1]
        m = np.array([[2.0, 1.0, 2.0], [1.0, 2.0, 2.0], [2.0, 2.0, 1.0]])
        # optimal total 3 via (1,0,2); ties on none
        assert hungarian(m)[0] == [1, 0, 2]

    def test_lexicographic_among_equal_cost_optima(self, rng):
        # tie-heavy matrices carry many optima; verify against brute-force
        # lexicographic selection
        for trial in range(600):
            n = int(rng.integers(1, 6))
            m = int(rng.integers(n, 7))
            style = trial % 4
            if style == 0:
                cost = rng.integers(0, 3, (n, m)).astype(float)
            elif style == 1:
                cost = rng.integers(0, 2, (n, m)).astype(float)
            elif style == 2:
                cost = np.zeros((n, m))
            else:
                cost = rng.choice([0.5, 1.5, 1.5, 7.25], (n, m))
            assign, total = hungarian(cost)
            best = None
            for p in itertools.permutations(range(m), n):
                t = math.fsum(cost[i, p[i]] for i in range(n))
                if best is None or t < best[0] or (t == best[0] and list(p) < best[1]):
                    best = (t, list(p))
            assert total == best[0]
            assert assign == best[1]

    def test_constant_shift_keeps_argmin(self, rng):
        for _ in range(50):
            cost = rng.random((4, 6))
            a1, t1 = hungarian(cost)
            a2, t2 = hungarian(cost + 2.5)
            assert a1 == a2
            assert t2 == pytest.approx(t1 + 4 * 2.5, abs=1e-9)

    def test_rows_exceed_cols_rejected(self):
        with pytest.raises(ValueError):
            hungarian(np.zeros((3, 2)))

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            hungarian([[1.0, math.inf], [0.0, 1.0]])

    def test_empty(self):
        assert hungarian(np.zeros((0, 5))) == ([], 0.0)


class TestSetLoss:
    def _worked_pair(self):
        gt = GroundTruthRecord(box=AABox(0, 0, 0.2, 0.2),
                               polygon=quad(0, 0, 1, 1), transcription="ab")
        pred = PredictionRecord(
            class_prob=0.5,
            box=AABox(0.1, 0.1, 0.3, 0.3),
            polygon=quad(0.1, 0, 1, 1),
            char_distributions=[[0.25] * 4, [0.25] * 4])
        return gt, pred

    def test_perfect_prediction_zero(self):
        gt = GroundTruthRecord(box=AABox(0, 0, 0.5, 0.5),
                               polygon=quad(0, 0, 0.5, 0.5), transcription="ab")
        pred = PredictionRecord(class_prob=1.0, box=gt.box, polygon=gt.polygon,
                                char_distributions=[[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
        total, breakdown = set_loss([(gt, pred)], alphabet="ab__", pad_symbol="_")
        assert total == 0.0
        assert all(v == 0.0 for v in breakdown.values())

    def test_component_sum_on_worked_example(self):
        gt, pred = self._worked_pair()
        total, breakdown = set_loss([(gt, pred)], alphabet="abc#", pad_symbol="#")
        expect = (2.0 * 0.0433217 + 3.158730 + 1.0 * 0.05 + 1.0 * 1.386294)
        assert total == pytest.approx(expect, abs=1e-5)
        assert breakdown["classification"] == pytest.approx(2.0 * 0.0433217, abs=1e-6)
        assert breakdown["box"] == pytest.approx(3.158730, abs=1e-6)
        assert breakdown["polygon"] == pytest.approx(0.05, abs=1e-12)
        assert breakdown["recognition"] == pytest.approx(1.386294, abs=1e-6)

    def test_no_object_only_classification(self):
        gt = GroundTruthRecord.no_object()
        pred = PredictionRecord(class_prob=0.3, box=AABox(0, 0, 1, 1))
        total, breakdown = set_loss([(gt, pred)])
        assert breakdown["box"] == breakdown["polygon"] == breakdown["recognition"] == 0.0
        assert total == pytest.approx(2.0 * focal_term(0.3, False), abs=1e-12)

    def test_permutation_invariance(self, rng):
        pairs = []
        for _ in range(6):
            x0, y0 = rng.uniform(0, 0.5, 2)
            gt = GroundTruthRecord(box=AABox(x0, y0, x0 + 0.2, y0 + 0.2),
                                   polygon=quad(x0, y0, 0.2, 0.2),
                                   transcription="w")
            pred = PredictionRecord(class_prob=float(rng.uniform(0.2, 1.0)),
                                    box=AABox(x0, y0, x0 + 0.25, y0 + 0.15))
            pairs.append((gt, pred))
        t1, _ = set_loss(pairs)
        t2, _ = set_loss(pairs[::-1])
        assert t1 == t2
