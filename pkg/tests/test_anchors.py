import numpy as np
import pytest
from hypothesis import example, given, settings
from hypothesis import strategies as st

from curveconnect.anchors import (SquareAnchor, all_anchors, assign_label, assign_labels,
                                  feature_sizes, filter_positive_squares, grid_anchors,
                                  segment_label, shrink_polygon, side_lengths, top_scoring)
from curveconnect.geom import Polygon, points_in_polygon


def band(x0, y0, length, height):
    top = [(x0 + length * k / 6, y0) for k in range(7)]
    bottom = [(x0 + length * k / 6, y0 + height) for k in range(6, -1, -1)]
    return Polygon(top + bottom)


def anchor(cx, cy, side):
    return SquareAnchor(cx, cy, side, 0, 0, 0, 0)


class TestSideLengths:
    def test_values(self):
        sides = side_lengths()
        assert sides[0] == [16, 20, 24, 28]
        assert sides[1] == [32, 40, 48, 56]
        assert sides[2] == [64, 80, 96, 112]
        assert sides[3] == [128, 160, 192, 224]

    def test_count(self):
        sides = side_lengths()
        assert len(sides) == 4 and all(len(s) == 4 for s in sides)
        assert len({s for level in sides for s in level}) == 16


class TestGrid:
    def test_small_grid(self):
        a = grid_anchors(0, 3, 2)
        assert len(a) == 24
        assert {(x.cx, x.cy) for x in a} == {(0, 0), (8, 0), (16, 0), (0, 8), (8, 8), (16, 8)}
        assert all(x.cx == x.i * 8 and x.cy == x.j * 8 for x in a)
        assert all(x.side == side_lengths()[0][x.k_index] for x in a)

    def test_single_cell(self):
        a = grid_anchors(2, 1, 1)
        assert len(a) == 4 and all((x.cx, x.cy) == (0, 0) for x in a)

    @pytest.mark.parametrize("level", range(4))
    def test_count_100(self, level):
        assert len(grid_anchors(level, 100, 100)) == 40000

    def test_total_count(self):
        sizes = feature_sizes(512, 384)
        assert sizes == [(64, 48), (32, 24), (16, 12), (8, 6)]
        assert len(all_anchors(sizes)) == sum(4 * w * h for w, h in sizes)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            grid_anchors(0, 0, 3)


class TestAssign:
    gt = band(0, 0, 200, 20)  # height 20, so sides up to 36 qualify

    def test_spanning_anchor_positive(self):
        lab = assign_label(anchor(100, 10, 32), [self.gt])
        assert lab.positive and lab.matched_gt == 0

    def test_too_large(self):
        assert not assign_label(anchor(100, 10, 40), [self.gt]).positive

    def test_center_outside(self):
        assert not assign_label(anchor(100, 50, 32), [self.gt]).positive

    def test_small_anchor_inside_tall_text(self):
        tall = band(0, 0, 200, 100)
        assert not assign_label(anchor(100, 50, 16), [tall]).positive

    def test_first_gt_wins(self):
        lab = assign_label(anchor(100, 10, 32), [band(50, 0, 100, 20), self.gt])
        assert lab.matched_gt == 0

    def test_no_gts(self):
        assert not assign_label(anchor(0, 0, 16), []).positive

    def test_batch_matches_single(self):
        gts = [band(10, 10, 150, 24), band(40, 80, 200, 30)]
        anchors = all_anchors(feature_sizes(256, 160))
        batch = assign_labels(anchors, gts)
        rng = np.random.default_rng(0)
        for k in rng.choice(len(anchors), 300, replace=False):
            single = assign_label(anchors[k], gts)
            assert (single.positive, single.matched_gt) == (batch[k].positive, batch[k].matched_gt)

    @settings(max_examples=60, deadline=None)
    @example(0.0, 1.0, 1.0, 0.0, -2.2250738585072014e-308, 16.0)  # centre a hair outside the corner
    @given(st.floats(-500, 500), st.floats(-500, 500), st.floats(0.25, 8.0),
           st.floats(0, 200), st.floats(-5, 30), st.sampled_from([16.0, 24.0, 32.0, 36.0, 40.0]))
    def test_translation_and_scale_equivariance(self, dx, dy, t, ax, ay, side):
        # dyadic scale factors keep the corner tests exact
        t = 2.0 ** round(np.log2(t))
        gt = band(0, 0, 200, 20)
        base = assign_label(anchor(ax, ay, side), [gt])
        moved = assign_label(anchor(ax + dx, ay + dy, side), [gt.translated(dx, dy)])
        scaled = assign_label(anchor(ax * t, ay * t, side * t), [gt.scaled(t)])
        assert base.positive == moved.positive == scaled.positive


class TestSegmentLabel:
    gt = band(0, 0, 120, 40)

    def test_values(self):
        g = segment_label(anchor(60, 20, 64), self.gt, 32)
        assert set(np.unique(g.values)) <= {0.0, 0.1, 1.0}
        assert g.shape == (32, 32) and g.stride == 2.0

    def test_centroid_outside_and_weak(self):
        res = 64
        g = segment_label(anchor(60, 20, 64), self.gt, res)
        cell = lambda x, y: g.values[int((y - (20 - 32)) / 1.0), int((x - (60 - 32)) / 1.0)]
        assert cell(60.5, 20.5) == 1.0   # centroid
        assert cell(60.5, 50.5) == 0.0   # below the band
        assert cell(60.5, 1.5) == 0.1    # inside the band, outside the half-area core

    def test_strong_region_is_half(self):
        gt = Polygon([(0, 0), (60, 0), (60, 40), (0, 40)])
        for res in (64, 128):
            g = segment_label(anchor(30, 20, 80), gt, res)
            inside = np.count_nonzero(g.values > 0)
            strong = np.count_nonzero(g.values == 1.0)
            assert strong / inside == pytest.approx(0.5, abs=0.05)

    def test_shrink_halves_area(self):
        assert shrink_polygon(self.gt).area() == pytest.approx(0.5 * self.gt.area())

    def test_bad_resolution(self):
        with pytest.raises(ValueError):
            segment_label(anchor(0, 0, 8), self.gt, 0)


class TestFilter:
    def test_example(self):
        anchors = [anchor(i, 0, 16) for i in range(3)]
        got = filter_positive_squares(anchors, [0.3, 0.5, 0.9], 0.4, 2000)
        assert [a.cx for a in got] == [2, 1]

    def test_none_above(self):
        assert top_scoring([0.1, 0.4], 0.4, 10) == []

    def test_cap(self):
        scores = np.random.default_rng(0).uniform(0.5, 1.0, 3000)
        got = top_scoring(scores, 0.4, 2000)
        assert len(got) == 2000
        assert sorted(got) == sorted(np.argsort(-scores, kind="stable")[:2000].tolist())
        assert np.all(np.diff(scores[got]) <= 0)

    def test_stable_ties(self):
        assert top_scoring([0.5, 0.9, 0.5, 0.9], 0.4, 10) == [1, 3, 0, 2]

    @pytest.mark.parametrize("s3, cap", [(-0.1, 5), (0.5, 0)])
    def test_rejects(self, s3, cap):
        with pytest.raises(ValueError):
            top_scoring([0.5], s3, cap)


def test_positive_anchor_centers_inside_gt():
    gts = [band(20, 30, 180, 22)]
    anchors = all_anchors(feature_sizes(256, 128))
    pos = [lab.anchor for lab in assign_labels(anchors, gts) if lab.positive]
    assert pos
    assert points_in_polygon(np.array([(a.cx, a.cy) for a in pos]), gts[0]).all()
