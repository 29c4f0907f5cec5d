import numpy as np
import pytest

from curveconnect.formats import (ParseError, format_annotations, format_detections, format_scoregrid,
                                  format_segments, parse_annotations, parse_ctw_line, parse_detections,
                                  parse_scoregrid, parse_segments, parse_totaltext_record,
                                  read_scoregrid, read_segment_dump, scoregrid_from_bytes,
                                  scoregrid_to_bytes, segments_from_bytes, segments_to_bytes,
                                  write_scoregrid, write_segment_dump)
from curveconnect.geom import Polygon
from curveconnect.maskgrid import ScoreGrid, SegmentPrediction
from fuzzing import fuzz_parser

RECT = "0,0,10,0,20,0,30,0,40,0,50,0,60,0,60,10,50,10,40,10,30,10,20,10,10,10,0,10"


def totaltext(n: int) -> str:
    top = [(10 * k, 0) for k in range(n)]
    bottom = [(10 * k, 8) for k in reversed(range(n))]
    return ",".join(f"{x},{y}" for x, y in top + bottom)


def predictions(rng, n=4):
    out = []
    for k in range(n):
        res = int(rng.integers(1, 6))
        cx, cy, side = (float(v) for v in rng.uniform([0, 0, 8], [500, 500, 200]).astype(np.float32))
        out.append(SegmentPrediction(f"img{k % 2}", cx, cy, side, rng.random((res, res)).astype(np.float32).astype(float),
                                     float(np.float32(rng.random())) if k % 3 else 1.0))
    return out


def same_preds(a, b):
    assert len(a) == len(b)
    for p, q in zip(a, b):
        assert (p.image_id, p.cx, p.cy, p.side, p.score) == (q.image_id, q.cx, q.cy, q.side, q.score)
        np.testing.assert_array_equal(p.scores, q.scores)


class TestCTW:
    def test_rectangle(self):
        p = parse_ctw_line(RECT)
        assert len(p) == 14
        assert p.bounds() == (0.0, 0.0, 60.0, 10.0)
        assert p.area() == 600.0

    def test_27_tokens(self):
        with pytest.raises(ParseError, match="expected 28 values"):
            parse_ctw_line(RECT.rsplit(",", 1)[0], 3)

    def test_whitespace_tolerated(self):
        padded = ", ".join(f" {t}\t" for t in RECT.split(","))
        np.testing.assert_array_equal(parse_ctw_line(padded).xy, parse_ctw_line(RECT).xy)

    def test_non_integer(self):
        with pytest.raises(ParseError, match="integer"):
            parse_ctw_line(RECT.replace("60,10", "60.5,10", 1))

    def test_underscore_digits_rejected(self):
        with pytest.raises(ParseError):
            parse_ctw_line(RECT.replace("20,0", "2_0,0", 1))

    def test_self_intersection(self):
        bad = RECT.split(",")
        bad[7] = "20"  # pull the fourth top vertex below the bottom edge
        with pytest.raises(ParseError, match="self-intersect"):
            parse_ctw_line(",".join(bad))

    def test_line_number_reported(self):
        with pytest.raises(ParseError) as info:
            parse_annotations(f"a {RECT}\n\nb 1,2,3\n")
        assert info.value.line == 3


class TestTotalText:
    def test_quadrilateral(self):
        p = parse_totaltext_record("0,0,10,0,10,5,0,5")
        assert len(p) == 4 and p.area() == 50.0

    def test_n15(self):
        assert len(parse_totaltext_record(totaltext(15))) == 30

    def test_n16(self):
        with pytest.raises(ParseError, match="N=16"):
            parse_totaltext_record(totaltext(16))

    def test_odd(self):
        with pytest.raises(ParseError, match="odd"):
            parse_totaltext_record("0,0,10,0,10,5,0")

    def test_odd_vertex_count(self):
        with pytest.raises(ParseError, match="not even"):
            parse_totaltext_record("0,0,10,0,10,5")

    def test_decimal_coordinates(self):
        assert parse_totaltext_record("0.5,0,10,0,10,5,0,5").xy[0, 0] == 0.5


class TestAnnotationFiles:
    def test_round_trip(self):
        rng = np.random.default_rng(0)
        recs = {"a": [parse_ctw_line(RECT)], "empty": [],
                "b": [Polygon(rng.integers(0, 9, (1, 2)) + [[0, 0], [5.25, 0], [5, 3.125]])]}
        text = format_annotations(recs)
        back = parse_annotations(text, "any")
        assert list(back) == list(recs)
        for k in recs:
            assert [p.xy.tolist() for p in back[k]] == [p.xy.tolist() for p in recs[k]]
        assert format_annotations(back) == text

    def test_comments_and_blank_lines(self):
        assert len(parse_annotations(f"# header\n\na {RECT}\n")["a"]) == 1

    def test_detections_round_trip(self):
        recs = {"a": [(0.75, parse_ctw_line(RECT)), (0.1, Polygon([(0, 0), (1.5, 0), (0, 2)]))], "z": []}
        text = format_detections(recs)
        back = parse_detections(text)
        assert format_detections(back) == text
        assert [s for s, _ in back["a"]] == [0.75, 0.1]

    def test_detection_score_range(self):
        with pytest.raises(ParseError, match="outside"):
            parse_detections(f"a 1.5 {RECT}")

    def test_unwritable_id(self):
        with pytest.raises(ValueError):
            format_annotations({"has space": []})


class TestScoreGrid:
    def test_text_round_trip(self, tmp_path):
        g = ScoreGrid(np.random.default_rng(1).random((3, 5)), 8.0)
        back = parse_scoregrid(format_scoregrid(g))
        np.testing.assert_array_equal(back.values, g.values)
        assert back.stride == 8.0
        write_scoregrid(tmp_path / "g.txt", g)
        np.testing.assert_array_equal(read_scoregrid(tmp_path / "g.txt").values, g.values)

    def test_binary_round_trip(self, tmp_path):
        vals = np.random.default_rng(2).random((4, 2)).astype(np.float32).astype(float)
        g = ScoreGrid(vals, 16.0)
        assert scoregrid_from_bytes(scoregrid_to_bytes(g)).values.tolist() == vals.tolist()
        write_scoregrid(tmp_path / "g.bin", g, binary=True)
        assert read_scoregrid(tmp_path / "g.bin").values.tolist() == vals.tolist()

    def test_truncated_binary(self):
        data = scoregrid_to_bytes(ScoreGrid(np.zeros((2, 2)), 4.0))
        with pytest.raises(ParseError) as info:
            scoregrid_from_bytes(data[:-3])
        assert info.value.offset is not None

    def test_bad_row(self):
        with pytest.raises(ParseError) as info:
            parse_scoregrid("SCOREGRID 2 2 4.0\n0 1\n0.5\n")
        assert info.value.line == 3

    def test_out_of_range(self):
        with pytest.raises(ParseError):
            parse_scoregrid("SCOREGRID 1 1 4.0\n1.5\n")


class TestSegmentDump:
    def test_empty(self, tmp_path):
        (tmp_path / "e.txt").write_bytes(b"")
        assert read_segment_dump(tmp_path / "e.txt") == []

    def test_text_round_trip(self, tmp_path):
        preds = predictions(np.random.default_rng(3))
        write_segment_dump(tmp_path / "d.txt", preds)
        back = read_segment_dump(tmp_path / "d.txt")
        same_preds(back, preds)
        assert format_segments(back) == format_segments(preds)

    def test_binary_round_trip(self, tmp_path):
        preds = predictions(np.random.default_rng(4))
        write_segment_dump(tmp_path / "d.bin", preds, binary=True)
        back = read_segment_dump(tmp_path / "d.bin")
        same_preds(back, preds)
        assert segments_to_bytes(back) == segments_to_bytes(preds)

    def test_default_score(self):
        (p,) = parse_segments("SEG a 1 2 8 1\n0.5\n")
        assert p.score == 1.0

    def test_length_mismatch_text(self):
        text = "SEG a 1 2 8 1\n0.5\nSEG b 1 2 8 2\n0.5 0.5\n0.5\n"
        with pytest.raises(ParseError) as info:
            parse_segments(text)
        assert info.value.offset == len("SEG a 1 2 8 1\n0.5\nSEG b 1 2 8 2\n0.5 0.5\n")

    def test_missing_rows(self):
        with pytest.raises(ParseError, match="needs 3 rows") as info:
            parse_segments("SEG a 1 2 8 1\n1\nSEG b 1 2 8 3\n1 1 1\n")
        assert info.value.offset == len("SEG a 1 2 8 1\n1\n")

    def test_length_mismatch_binary(self):
        data = segments_to_bytes(predictions(np.random.default_rng(5), 2))
        with pytest.raises(ParseError) as info:
            segments_from_bytes(data[:-4])
        assert info.value.offset is not None and 0 < info.value.offset < len(data)

    def test_bad_magic(self):
        data = segments_to_bytes(predictions(np.random.default_rng(6), 1))
        with pytest.raises(ParseError) as info:
            segments_from_bytes(data + b"JUNK")
        assert info.value.offset == len(data)

    def test_bad_header(self):
        with pytest.raises(ParseError, match="SEG"):
            parse_segments("SEG a 1 2\n")

    def test_score_out_of_range(self):
        with pytest.raises(ParseError):
            parse_segments("SEG a 1 2 8 1\n1.5\n")


class TestFuzz:
    def test_ctw(self):
        counts = fuzz_parser(parse_ctw_line, [RECT], 2000, 0, ParseError)
        assert counts["rejected"] > 0

    def test_totaltext(self):
        counts = fuzz_parser(parse_totaltext_record, [totaltext(2), totaltext(7), totaltext(15)], 2000, 1, ParseError)
        assert counts["rejected"] > 0 and counts["accepted"] > 0

    def test_annotation_files(self):
        fuzz_parser(lambda s: parse_annotations("img " + s, "any"), [RECT, totaltext(4)], 1000, 2, ParseError)

    def test_segment_dump_bytes(self):
        rng = np.random.default_rng(7)
        data = bytearray(segments_to_bytes(predictions(rng, 3)))
        for _ in range(500):
            mutated = bytearray(data)
            for _ in range(int(rng.integers(1, 4))):
                mutated[int(rng.integers(len(mutated)))] = int(rng.integers(256))
            cut = int(rng.integers(len(mutated) + 1))
            for blob in (bytes(mutated), bytes(mutated[:cut])):
                try:
                    segments_from_bytes(blob)
                except ParseError:
                    pass

    def test_segment_dump_text(self):
        text = format_segments(predictions(np.random.default_rng(8), 3))
        fuzz_parser(parse_segments, [text], 1000, 3, ParseError)
