import numpy as np
import pytest

from lobvol.lobster import (LobsterSession, load_lobster, to_event_records,
                            to_tick_path)

BOOK_ROW = "1000100,50,1000000,40,1000200,60,999900,70"

MESSAGES = [
    # time, type, order_id, size, price, direction
    "38000,1,11,100,1000000,1",    # bid limit at level 1
    "38001,4,12,200,1000100,-1",   # visible execution on the ask
    "38002,3,13,300,999900,1",     # delete on bid level 2
    "38003,5,14,100,1000150,-1",   # hidden execution: skipped
    "38004,1,15,100,1234567,1",    # price outside the visible window
]


def _write(tmp_path, messages, books, name="x"):
    mf = tmp_path / f"{name}_message.csv"
    bf = tmp_path / f"{name}_book.csv"
    mf.write_text("\n".join(messages) + ("\n" if messages else ""))
    bf.write_text("\n".join(books) + ("\n" if books else ""))
    return mf, bf


@pytest.fixture
def session(tmp_path):
    mf, bf = _write(tmp_path, MESSAGES, [BOOK_ROW] * len(MESSAGES))
    return load_lobster(mf, bf, levels=2)


def test_load_aligned(session):
    assert len(session) == 5
    assert session.levels == 2
    assert "rejected_lines" not in session.diagnostics


def test_row_count_mismatch_rejected(tmp_path):
    mf, bf = _write(tmp_path, MESSAGES[:3], [BOOK_ROW] * 2)
    with pytest.raises(ValueError, match="mismatch"):
        load_lobster(mf, bf, levels=2)


def test_decreasing_times_rejected(tmp_path):
    rows = ["38002,1,1,100,1000000,1", "38001,1,2,100,1000000,1"]
    mf, bf = _write(tmp_path, rows, [BOOK_ROW] * 2)
    with pytest.raises(ValueError, match="non-decreasing"):
        load_lobster(mf, bf, levels=2)


def test_malformed_rows_dropped_from_both(tmp_path):
    rows = list(MESSAGES)
    rows[1] = "38001,4,12,garbage,1000100,-1"
    mf, bf = _write(tmp_path, rows, [BOOK_ROW] * len(rows))
    s = load_lobster(mf, bf, levels=2)
    assert len(s) == 4
    assert s.diagnostics["rejected_lines"] == [1]


def test_empty_files(tmp_path):
    mf, bf = _write(tmp_path, [], [])
    s = load_lobster(mf, bf, levels=2)
    assert len(s) == 0
    assert to_event_records(s) == []


def test_event_records_semantics(session):
    recs = to_event_records(session)
    assert [r.kind for r in recs] == ["limit", "market", "cancel"]
    # direction 1 = bid side = negative level; -1 = ask side = positive
    assert [r.level for r in recs] == [-1, 1, -2]
    # sizes 100, 200, 300 over a median event size of 100
    assert [r.size for r in recs] == [1, 2, 3]
    # pre-event queues come from the previous snapshot
    assert recs[0].own_q == 40.0 and recs[0].opposite_q == 50.0
    assert recs[2].own_q == 70.0
    assert session.diagnostics["skipped_events"] == 1
    assert session.diagnostics["out_of_window_events"] == 1
    assert session.diagnostics["median_size"] == 100.0


def test_event_records_without_normalization(session):
    recs = to_event_records(session, median_size_normalization=False)
    assert [r.size for r in recs] == [100.0, 200.0, 300.0]


def test_tick_path(session):
    path = to_tick_path(session)
    assert len(path.quotes) == 5
    # times re-based to the session start
    assert path.quotes[0].timestamp == 0.0
    assert path.quotes[-1].timestamp == 4.0
    assert path.quotes[0].best_bid == pytest.approx(100.00)
    assert path.quotes[0].best_ask == pytest.approx(100.01)
    # the single visible execution appears on the trade tape
    assert len(path.trades) == 1
    t, p = path.trades[0]
    assert t == 1.0 and p == pytest.approx(100.01)


def test_trim_window(session):
    trimmed = session.trim(start=38001.0, end=38003.0)
    assert len(trimmed) == 3
    assert trimmed.diagnostics["trimmed"] == 2
    assert float(trimmed.messages["time"].iloc[0]) == 38001.0


def test_default_trim_drops_open_and_close(tmp_path):
    times = [34200.0, 37900.0, 50000.0, 57000.0, 57500.0]
    rows = [f"{t},1,{i},100,1000000,1" for i, t in enumerate(times)]
    mf, bf = _write(tmp_path, rows, [BOOK_ROW] * len(rows))
    s = load_lobster(mf, bf, levels=2).trim()
    kept = s.messages["time"].to_numpy()
    assert np.array_equal(kept, [37900.0, 50000.0])
