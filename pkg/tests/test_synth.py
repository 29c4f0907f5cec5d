import numpy as np
import pytest

from curveconnect.anchors import assign_labels
from curveconnect.geom import points_in_polygon, polygon_distance
from curveconnect.anchors import square_cell_centers
from curveconnect.synth import SynthParams, boundary_band, gen_case, perturb


@pytest.fixture(scope="module")
def cases():
    return [gen_case(seed) for seed in range(6)]


def test_deterministic():
    a, b = gen_case(17), gen_case(17)
    assert [p.xy.tolist() for p in a.gt_polygons] == [p.xy.tolist() for p in b.gt_polygons]
    assert len(a.masks) == len(b.masks)
    assert all(x == y for x, y in zip(a.masks, b.masks))


def test_gt_shape(cases):
    for c in cases:
        assert 1 <= len(c.gt_polygons) <= 4
        for g in c.gt_polygons:
            assert len(g) == 14 and g.is_simple()
            x0, y0, x1, y1 = g.bounds()
            assert x0 >= 0 and y0 >= 0 and x1 <= 512 and y1 <= 512


def test_bands_apart(cases):
    for c in cases:
        g = c.gt_polygons
        for i in range(len(g)):
            for j in range(i + 1, len(g)):
                assert polygon_distance(g[i], g[j]) >= 16.0


def test_straight_band_is_rectangle():
    c = gen_case(3, SynthParams(kinds=("line",), max_tilt=0.0))
    for g in c.gt_polygons:
        xy = g.xy
        assert np.ptp(xy[:7, 1]) == 0 and np.ptp(xy[7:, 1]) == 0
        assert np.all(np.diff(xy[:7, 0]) > 0)


def test_anchors_satisfy_labelling_rules(cases):
    for c in cases:
        labels = assign_labels(c.anchors, c.gt_polygons)
        assert all(lab.positive for lab in labels)
        assert [lab.matched_gt for lab in labels] == c.matched_gt


def test_every_gt_has_three_anchors(cases):
    for c in cases:
        counts = np.bincount(c.matched_gt, minlength=len(c.gt_polygons))
        assert counts.min() >= 3


def test_masks_inside_their_gt(cases):
    for c in cases:
        for m, a, g in zip(c.masks, c.anchors, c.matched_gt):
            pts = square_cell_centers(a.cx, a.cy, a.side, m.resolution)
            on = m.scores > 0.5
            assert points_in_polygon(pts[on], c.gt_polygons[g]).all()


def test_too_wide_rejected():
    with pytest.raises(ValueError):
        gen_case(0, SynthParams(width_range=(100.0, 200.0)))


class TestPerturb:
    def test_zero_noise_identity(self, cases):
        assert perturb(cases[0], 0.0) is cases[0]

    def test_interior_unchanged(self, cases):
        c = cases[1]
        noisy = perturb(c, 0.1)
        changed = 0
        for clean, dirty in zip(c.masks, noisy.masks):
            band = boundary_band(clean.scores > 0.5)
            diff = clean.scores != dirty.scores
            assert not np.any(diff & ~band)
            changed += int(diff.sum())
        assert changed > 0

    def test_flip_rate(self, cases):
        c = cases[2]
        noisy = perturb(c, 0.2)
        flips = sum(int((a.scores != b.scores).sum()) for a, b in zip(c.masks, noisy.masks))
        band = sum(int(boundary_band(a.scores > 0.5).sum()) for a in c.masks)
        assert flips / band == pytest.approx(0.2, abs=0.02)

    def test_rejects_bad_noise(self, cases):
        with pytest.raises(ValueError):
            perturb(cases[0], 0.6)

    def test_deterministic(self, cases):
        a, b = perturb(cases[3], 0.1), perturb(cases[3], 0.1)
        assert all(x == y for x, y in zip(a.masks, b.masks))


def test_boundary_band_ignores_square_border():
    bits = np.zeros((10, 10), bool)
    bits[:, :5] = True
    band = boundary_band(bits)
    assert band[:, 3:7].all()
    assert not band[:, :3].any() and not band[:, 7:].any()
