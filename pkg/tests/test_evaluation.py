import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curveconnect.evaluation import aggregate, evaluate, iou_matrix, match_image, scores
from curveconnect.geom import Polygon
from oracles import greedy_match_bruteforce


def box(x, y, w=1.0, h=1.0):
    return Polygon([(x, y), (x + w, y), (x + w, y + h), (x, y + h)])


def random_boxes(rng, n):
    return [box(*rng.uniform(0, 10, 2), *rng.uniform(1, 4, 2)) for _ in range(n)]


class TestMatch:
    def test_exact(self):
        gts = [box(0, 0), box(5, 5), box(9, 0)]
        m = match_image(gts, gts)
        assert m.tp == 3 and m.n_gt == 3

    def test_third_overlap_rejected(self):
        assert match_image([box(0.5, 0)], [box(0, 0)]).tp == 0

    def test_two_dets_one_gt(self):
        gt = box(0, 0, 10, 10)
        worse, better = box(2, 0, 10, 10), box(1, 0, 10, 10)
        m = match_image([worse, better], [gt])
        assert m.tp == 1 and m.pairs[0][0] == 1

    def test_tie_prefers_lower_indices(self):
        gt = box(0, 0, 10, 10)
        a, b = box(1, 0, 10, 10), box(-1, 0, 10, 10)  # same IoU
        m = match_image([a, b], [gt])
        assert m.pairs[0][:2] == (0, 0)

    def test_threshold_inclusive(self):
        # IoU exactly 0.5: 10x10 against 10x20 containing it
        assert match_image([box(0, 0, 10, 10)], [box(0, 0, 10, 20)]).tp == 1

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_matches_bruteforce_greedy(self, seed):
        rng = np.random.default_rng(seed)
        dets, gts = random_boxes(rng, int(rng.integers(0, 7))), random_boxes(rng, int(rng.integers(0, 7)))
        m = match_image(dets, gts, 0.3)
        assert m.tp == greedy_match_bruteforce(iou_matrix(dets, gts), 0.3)
        assert len({d for d, _, _ in m.pairs}) == m.tp == len({g for _, g, _ in m.pairs})
        assert m.tp <= min(len(dets), len(gts))


class TestScores:
    def test_perfect(self):
        assert scores(5, 5, 5) == (1.0, 1.0, 1.0)

    def test_half_precision(self):
        p, r, f = scores(2, 4, 2)
        assert (p, r) == (0.5, 1.0) and f == pytest.approx(2 / 3)

    def test_vacuous(self):
        assert scores(0, 0, 0) == (1.0, 1.0, 1.0)

    def test_no_detections(self):
        assert scores(0, 0, 3) == (0.0, 0.0, 0.0)

    def test_no_ground_truth(self):
        p, r, f = scores(0, 2, 0)
        assert p == 0.0 and r == 0.0 and f == 0.0


class TestEvaluate:
    def test_self_evaluation(self):
        rng = np.random.default_rng(0)
        gts = {f"img{k}": random_boxes(rng, int(rng.integers(0, 5))) for k in range(10)}
        rep = evaluate(gts, gts)
        assert (rep.precision, rep.recall, rep.f_measure) == (1.0, 1.0, 1.0)

    def test_micro_average(self):
        gts = {"a": [box(0, 0)], "b": [box(0, 0), box(5, 5)]}
        dets = {"a": [box(0, 0)], "b": [box(0, 0), box(20, 20)]}
        rep = evaluate(dets, gts)
        assert (rep.tp, rep.n_det, rep.n_gt) == (2, 3, 3)
        assert rep.line() == "0.666667 0.666667 0.666667 2 3 3"

    def test_image_only_in_detections(self):
        rep = evaluate({"x": [box(0, 0)]}, {"y": [box(0, 0)]})
        assert (rep.tp, rep.n_det, rep.n_gt) == (0, 1, 1)
        assert [m.image_id for m in rep.per_image] == ["y", "x"]

    def test_spurious_detection_never_raises_precision(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            gts = {"i": random_boxes(rng, 4)}
            dets = {"i": random_boxes(rng, 4)}
            before = evaluate(dets, gts)
            after = evaluate({"i": dets["i"] + [box(100, 100)]}, gts)
            assert after.precision <= before.precision
            missed = evaluate(dets, {"i": gts["i"] + [box(-100, -100)]})
            assert missed.recall <= before.recall

    def test_report_invariants(self):
        rng = np.random.default_rng(2)
        rep = aggregate(match_image(random_boxes(rng, 5), random_boxes(rng, 5)) for _ in range(8))
        assert 0 <= rep.precision <= 1 and 0 <= rep.recall <= 1
        if rep.precision + rep.recall > 0:
            assert rep.f_measure == pytest.approx(2 * rep.precision * rep.recall / (rep.precision + rep.recall))
