import csv

import numpy as np
import pytest

from rnnblock.bench import (
    BenchRecord,
    SpeedupRow,
    bench,
    emit_csv,
    speedup,
    summarize,
    verify,
)
from rnnblock.cells import CellKind
from rnnblock.model_io import (
    RnnConfig,
    generate_sequence,
    generate_weights,
    preset_config,
)
from rnnblock.traffic import estimate_traffic

# execution times (ms) and published speed-ups: small SRU on the Intel box
# and large SRU on the ARM box
TABLE_SMALL_INTEL = [
    ("SRU-1", 475.43, 100.0),
    ("SRU-2", 288.729, 164.7),
    ("SRU-4", 197.765, 240.4),
    ("SRU-8", 153.39, 309.9),
    ("SRU-16", 129.591, 366.9),
    ("SRU-32", 118.247, 402.1),
    ("SRU-64", 96.302, 493.7),
    ("SRU-128", 93.219, 510.0),
]
TABLE_LARGE_ARM = [
    ("SRU-1", 3652.59, 100.0),
    ("SRU-2", 1925.07, 189.7),
    ("SRU-4", 1078.03, 338.8),
    ("SRU-8", 634.951, 575.3),
    ("SRU-16", 392.163, 931.4),
    ("SRU-32", 288.659, 1265.4),
    ("SRU-64", 275.078, 1327.8),
    ("SRU-128", 275.658, 1325.0),
]


def test_speedup_published_examples():
    assert speedup(475.43, 118.247) == 402.1
    assert speedup(3652.59, 288.659) == 1265.4


def test_speedup_identity_and_validation():
    assert speedup(123.4, 123.4) == 100.0
    with pytest.raises(ValueError):
        speedup(0.0, 1.0)
    with pytest.raises(ValueError):
        speedup(1.0, -2.0)


@pytest.mark.parametrize("table", [TABLE_SMALL_INTEL, TABLE_LARGE_ARM])
def test_speedup_reproduces_published_tables(table):
    base = table[0][1]
    for _, ms, pct in table:
        assert abs(speedup(base, ms) - pct) <= 0.1


def test_summarize_speedup_convention():
    records = []
    for block, ms in ((1, 40.0), (2, 25.0), (4, 16.0)):
        for rep, jitter in enumerate((0.0, 1.0, -1.0)):
            records.append(BenchRecord("sru", "blocked", 8, 8, 64, block, 1,
                                       rep, ms + jitter))
    rows = summarize(records)
    assert rows[0] == SpeedupRow("SRU-1", 40.0, 100.0)
    assert rows[1] == SpeedupRow("SRU-2", 25.0, 160.0)
    assert rows[2] == SpeedupRow("SRU-4", 16.0, 250.0)


def test_summarize_lstm_row_has_no_speedup():
    records = [BenchRecord("lstm", "stepwise", 8, 8, 64, 1, 1, 0, 12.5)]
    rows = summarize(records)
    assert rows[0].label == "LSTM"
    assert rows[0].speedup_pct is None


def _tiny_case(kind=CellKind.SRU, d=8, L=32, precision="f32"):
    cfg = RnnConfig(kind, d, d, precision=precision)
    ws = generate_weights(cfg, 42)
    X = generate_sequence(L, d, 43, precision)
    return cfg, ws, X


def test_bench_record_counts_and_median():
    cfg, ws, X = _tiny_case()
    result = bench(cfg, ws, X, [1, 2], repeats=3)
    assert len(result.records) == 6  # 3 repeats x 2 block sizes
    assert all(r.elapsed_ms > 0 for r in result.records)
    assert [r.repeat for r in result.records[:3]] == [0, 1, 2]
    assert len(result.summaries) == 2
    assert result.summaries[0].speedup_pct == 100.0


def test_bench_lstm_single_stepwise_row():
    cfg, ws, X = _tiny_case(CellKind.LSTM)
    result = bench(cfg, ws, X, [1, 2, 4], repeats=2)
    assert {r.impl for r in result.records} == {"stepwise"}
    assert {r.block for r in result.records} == {1}
    assert result.summaries[0].label == "LSTM"


def test_bench_rejects_bad_repeats():
    cfg, ws, X = _tiny_case()
    with pytest.raises(ValueError):
        bench(cfg, ws, X, [1], repeats=0)


def test_verify_passes_for_sru():
    cfg, ws, X = _tiny_case(d=64, L=256)
    report = verify(cfg, ws, X, [1, 2, 4, 8, 16, 32, 64, 128])
    assert report.passed
    assert all(r.max_abs_diff <= 1e-4 for r in report.rows)


def test_verify_lstm_uses_precomputed_path():
    cfg, ws, X = _tiny_case(CellKind.LSTM, d=8, L=32)
    report = verify(cfg, ws, X, [1, 16])
    assert report.passed


def test_verify_flags_breach():
    cfg, ws, X = _tiny_case(d=16, L=32)
    report = verify(cfg, ws, X, [4], tolerance=0.0)
    assert not report.passed


# ---------------------------------------------------------------------------
# CSV emission


def test_emit_csv_empty_is_header_only(tmp_path):
    path = tmp_path / "empty.csv"
    emit_csv([], path, kind="records")
    assert path.read_bytes() == (b"cell,impl,d_in,d_h,seq_len,block,threads,"
                                 b"repeat,elapsed_ms\r\n")
    with pytest.raises(ValueError):
        emit_csv([], tmp_path / "nope.csv")


def test_emit_csv_records_round_trip(tmp_path):
    cfg, ws, X = _tiny_case()
    result = bench(cfg, ws, X, [1, 4], repeats=2)
    path = tmp_path / "raw.csv"
    emit_csv(result.records, path)
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    assert len(rows) == len(result.records)
    for row, rec in zip(rows, result.records):
        assert row["cell"] == rec.cell
        assert int(row["block"]) == rec.block
        assert float(row["elapsed_ms"]) == rec.elapsed_ms


def test_emit_csv_summary_round_trip_and_recompute(tmp_path):
    rows = [SpeedupRow(label, ms, pct if label != "SRU-1" else 100.0)
            for label, ms, pct in TABLE_SMALL_INTEL]
    path = tmp_path / "summary.csv"
    emit_csv(rows, path)
    with open(path, newline="") as f:
        parsed = list(csv.DictReader(f))
    base = float(parsed[0]["median_ms"])
    for row in parsed:
        # the emitted speed-up column must be recomputable from the medians
        recomputed = 100.0 * base / float(row["median_ms"])
        assert abs(recomputed - float(row["speedup_pct"])) <= 0.05


def test_emit_csv_lstm_dash_convention(tmp_path):
    rows = [SpeedupRow("LSTM", 673.667, None), SpeedupRow("SRU-1", 475.43, 100.0)]
    path = tmp_path / "summary.csv"
    emit_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[1] == "LSTM,673.667,-"


def test_emit_csv_traffic(tmp_path):
    cfg = preset_config("sru-small")
    reports = [estimate_traffic(cfg, 1024, T) for T in (1, 32)]
    path = tmp_path / "traffic.csv"
    emit_csv(reports, path)
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    assert rows[0]["cell"] == "sru"
    assert int(rows[0]["weight_bytes"]) == 3_149_824
    assert float(rows[1]["ratio_vs_T1"]) == 1.0 / 32


def test_emit_csv_rejects_mixed_rows(tmp_path):
    rows = [SpeedupRow("A", 1.0, 100.0),
            BenchRecord("sru", "blocked", 1, 1, 1, 1, 1, 0, 1.0)]
    with pytest.raises(ValueError):
        emit_csv(rows, tmp_path / "mixed.csv")


def test_bench_deterministic_apart_from_timing():
    cfg, ws, X = _tiny_case()
    a = bench(cfg, ws, X, [1, 2], repeats=2)
    b = bench(cfg, ws, X, [1, 2], repeats=2)
    strip = lambda recs: [(r.cell, r.impl, r.d_in, r.d_h, r.seq_len, r.block,
                           r.threads, r.repeat) for r in recs]
    assert strip(a.records) == strip(b.records)
