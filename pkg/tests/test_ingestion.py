import json

import pytest

from botdna.ingestion import (
    InvalidRange,
    NoValidRows,
    SequenceEncoder,
    UnknownFormat,
    derive_duplication,
    derive_sentiment,
    encode_account,
    filter_years,
    parse_timestamp,
    parse_trace_file,
)

ROW = {
    "account_id": "a", "timestamp": "2015-03-01T10:00:00Z", "action": "tweet",
    "has_url": False, "media": "none", "has_emoji": False, "has_hashtag": False,
    "text": "hello world", "sentiment": "neutral",
}


def write_jsonl(path, rows, extra_lines=()):
    with open(path, "w", encoding="utf-8") as fh:
        for r in rows:
            fh.write(json.dumps(r) + "\n")
        for line in extra_lines:
            fh.write(line + "\n")
    return path


def test_parse_timestamp_forms():
    assert parse_timestamp(1_000_000) == 1_000_000.0
    assert parse_timestamp("1000000") == 1_000_000.0
    assert parse_timestamp("1970-01-12T13:46:40Z") == 1_000_000.0
    # naive ISO times are UTC
    assert parse_timestamp("1970-01-12T13:46:40") == 1_000_000.0


def test_jsonl_skips_bad_rows(tmp_path):
    rows = [
        ROW,
        {**ROW, "timestamp": "2015-03-02T10:00:00Z", "text": "Hello   WORLD"},
        {**ROW, "action": "quote"},
        {k: v for k, v in ROW.items() if k != "media"},
    ]
    path = write_jsonl(tmp_path / "t.jsonl", rows, ["{not json", "[1, 2]"])
    corpus = parse_trace_file(path)
    assert corpus.n_records == 2
    rep = corpus.report.to_dict()
    assert rep["rows_total"] == 6
    assert rep["rows_skipped"] == 4
    assert rep["reasons"] == {"invalid:action": 1, "malformed": 2, "missing:media": 1}
    seqs = SequenceEncoder().fit_transform(corpus)
    assert [s.blocks for s in seqs] == [("TXMKZQL", "TXMKZDL")]


def test_csv_format(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text(
        "account_id,timestamp,action,has_url,media,has_emoji,has_hashtag,text,sentiment\n"
        "b,1500000000,reply,true,image,1,0,nice day,\n"
        "a,1500000001,retweet,false,video,0,1,,negative\n",
        encoding="utf-8",
    )
    corpus = parse_trace_file(path)
    assert list(corpus.accounts) == ["a", "b"]
    seqs = SequenceEncoder().fit_transform(corpus)
    assert seqs[0].blocks == ("RXVKHEN",)
    # no label: lexicon fallback ("nice" is positive)
    assert seqs[1].blocks == ("YUIJZQP",)


def test_errors(tmp_path):
    with pytest.raises(UnknownFormat):
        parse_trace_file(tmp_path / "x.parquet")
    path = write_jsonl(tmp_path / "bad.jsonl", [{**ROW, "action": "bogus"}])
    with pytest.raises(NoValidRows):
        parse_trace_file(path)
    with pytest.raises(FileNotFoundError):
        parse_trace_file(tmp_path / "missing.jsonl")


def test_filter_years(tmp_path):
    rows = [ROW, {**ROW, "timestamp": "2021-01-01T00:00:00Z"}, {**ROW, "timestamp": "2008-12-31T23:59:59Z"}]
    corpus = parse_trace_file(write_jsonl(tmp_path / "t.jsonl", rows))
    kept = filter_years(corpus, 2009, 2020)
    assert kept.n_records == 1
    with pytest.raises(InvalidRange):
        filter_years(corpus, 2020, 2009)


def test_duplication_is_account_local_and_normalized():
    assert derive_duplication(["Hi there", "", "hi   THERE", "other", "https://x.co/a"]) == [
        "unique", "empty", "duplicate", "unique", "empty",
    ]


def test_sentiment_label_wins_over_lexicon():
    assert derive_sentiment("awful terrible", "positive") == "positive"
    assert derive_sentiment("great", lexicon={"great": 1}) == "positive"
    assert derive_sentiment("bad", lexicon={"bad": -1}) == "negative"
    assert derive_sentiment("", lexicon={}) == "neutral"


def test_ingestion_is_deterministic(tmp_path):
    rows = [{**ROW, "account_id": f"u{i % 3}", "timestamp": 1_400_000_000 + i, "text": f"t{i % 4}"}
            for i in range(30)]
    path = write_jsonl(tmp_path / "t.jsonl", rows)
    a = SequenceEncoder().fit_transform(parse_trace_file(path))
    b = SequenceEncoder().fit_transform(parse_trace_file(path))
    assert a == b


def test_encoder_rejects_non_corpus():
    with pytest.raises(TypeError):
        SequenceEncoder().fit([1, 2])


def test_encode_account_equal_timestamps_keep_input_order(tmp_path):
    rows = [{**ROW, "timestamp": 1_500_000_000, "action": a, "text": a} for a in ("reply", "tweet", "retweet")]
    corpus = parse_trace_file(write_jsonl(tmp_path / "t.jsonl", rows))
    assert [b[0] for b in encode_account(corpus.accounts["a"]).blocks] == ["Y", "T", "R"]
