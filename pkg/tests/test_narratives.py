import gzip
import json

import pytest

from conftest import narrative_line
from tracekit.data.narratives import parse_record, read_records
from tracekit.errors import EmptyTrace, MalformedRecord


def test_direct_field_mapping():
    record = parse_record(narrative_line(words=("a", "red", "car"), n_points=12))
    assert record.caption == "a red car"
    assert [w.text for w in record.timed_words] == ["a", "red", "car"]
    assert len(record.trace) == 12
    assert (record.image_width, record.image_height) == (640.0, 480.0)


def test_missing_timed_caption_is_malformed():
    obj = json.loads(narrative_line())
    del obj["timed_caption"]
    with pytest.raises(MalformedRecord, match="timed_caption"):
        parse_record(json.dumps(obj))


@pytest.mark.parametrize("line", ["not json", "[1, 2]", '{"image_id": "x"}'])
def test_bad_lines_are_malformed(line):
    with pytest.raises(MalformedRecord):
        parse_record(line)


def test_wrong_field_type_is_malformed():
    obj = json.loads(narrative_line())
    obj["traces"][0][0]["x"] = "12"
    with pytest.raises(MalformedRecord):
        parse_record(json.dumps(obj))


def test_empty_trace():
    obj = json.loads(narrative_line())
    obj["traces"] = [[]]
    with pytest.raises(EmptyTrace):
        parse_record(json.dumps(obj))


def test_interleaved_strokes_are_merged_in_time_order(caplog):
    first = [{"x": 1, "y": 1, "t": t} for t in (0.1, 0.3, 0.5)]
    second = [{"x": 2, "y": 2, "t": t} for t in (0.2, 0.4, 0.6)]
    line = json.dumps(
        {
            "image_id": "x",
            "image_width": 10,
            "image_height": 10,
            "caption": "a",
            "timed_caption": [{"utterance": "a", "start_time": 0.0, "end_time": 1.0}],
            "traces": [first, second],
        }
    )
    record = parse_record(line)
    ts = [p.t for p in record.trace.points]
    assert ts == sorted(p["t"] for p in first + second)
    assert all(a <= b for a, b in zip(ts, ts[1:]))
    assert "re-sorting" in caplog.text


def test_normalized_coordinates_are_rescaled():
    record = parse_record(narrative_line(normalized=True, width=200, height=100))
    xs = [p.x for p in record.trace.points]
    assert max(xs) > 1.5
    assert all(0 <= p.x <= 200 and 0 <= p.y <= 100 for p in record.trace.points)


def test_image_size_fallback():
    obj = json.loads(narrative_line())
    del obj["image_width"], obj["image_height"]
    with pytest.raises(MalformedRecord):
        parse_record(json.dumps(obj))
    record = parse_record(json.dumps(obj), image_size=(800, 600))
    assert record.image_width == 800


@pytest.mark.parametrize("missing", ["image_width", "image_height"])
def test_half_an_image_size_is_malformed(missing):
    obj = json.loads(narrative_line())
    del obj[missing]
    with pytest.raises(MalformedRecord, match="counterpart"):
        parse_record(json.dumps(obj), image_size=(800, 600))


def test_caption_mismatch_warns(caplog):
    obj = json.loads(narrative_line())
    obj["caption"] = "something else"
    parse_record(json.dumps(obj))
    assert "caption does not match" in caplog.text


def test_read_records_gzip_and_errors(tmp_path):
    path = tmp_path / "records.jsonl.gz"
    lines = [narrative_line("a"), "", "{broken", narrative_line("b")]
    with gzip.open(path, "wt", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")

    results = list(read_records(path))
    assert [n for n, _ in results] == [1, 3, 4]
    assert results[0][1].image_id == "a"
    assert isinstance(results[1][1], MalformedRecord)
    assert results[2][1].image_id == "b"
