"""Benchmark harness: correctness gate, timing, speed-ups, CSV emission.

Timing conventions: one untimed warm-up run per configuration, then
``repeats`` timed runs of the full sequence with a monotonic clock; the
summary takes the median. Speed-ups follow the T=1 convention: every
blocked row is reported as 100 * median(T=1) / median(T), so the T=1 row
itself reads 100%. LSTM appears as a single stepwise row with no speed-up
entry.

A configuration is never timed unverified: callers either run ``verify``
first (the CLI does this in the same invocation) or explicitly skip it.
"""

import csv
import statistics
import time
from dataclasses import dataclass, field

from .blocked import lstm_run_precomputed, run_blocked
from .cells import CellKind, run_stepwise
from .kernels import set_compute_threads
from .model_io import RnnConfig, WeightSet
from .traffic import TrafficReport

ORACLE_TOLERANCE = {"f32": 1e-4, "f64": 1e-9}

IMPLS = ("stepwise", "blocked", "lstm-precomputed")


@dataclass(frozen=True)
class BenchRecord:
    cell: str
    impl: str
    d_in: int
    d_h: int
    seq_len: int
    block: int
    threads: int
    repeat: int
    elapsed_ms: float


@dataclass(frozen=True)
class SpeedupRow:
    label: str
    median_ms: float
    speedup_pct: float = None  # None for rows without a T=1 base (LSTM)


def speedup(base_ms: float, t_ms: float) -> float:
    """100 * base / t, one decimal place."""
    if base_ms <= 0 or t_ms <= 0:
        raise ValueError("times must be positive")
    return round(100.0 * base_ms / t_ms, 1)


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class VerifyRow:
    block: int
    max_abs_diff: float
    tolerance: float
    passed: bool


@dataclass
class VerifyReport:
    cell: str
    precision: str
    seq_len: int
    rows: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)


def _lstm_precomputed_all_layers(weights: WeightSet, X, block_size, kernel="fast"):
    out = X
    for layer in weights.layers:
        out = lstm_run_precomputed(layer, out, block_size, kernel=kernel)
    return out


def verify(cfg: RnnConfig, weights: WeightSet, X, t_list, tolerance: float = None) -> VerifyReport:
    """Blocked-vs-stepwise equivalence for every requested block size."""
    import numpy as np

    tol = ORACLE_TOLERANCE[cfg.precision] if tolerance is None else tolerance
    oracle = run_stepwise(cfg, weights, X, kernel="reference")
    report = VerifyReport(cell=cfg.kind.value, precision=cfg.precision, seq_len=X.shape[0])
    for T in t_list:
        if cfg.kind is CellKind.LSTM:
            out = _lstm_precomputed_all_layers(weights, X, T)
        else:
            out = run_blocked(cfg, weights, X, T)
        diff = float(np.max(np.abs(out - oracle)))
        report.rows.append(VerifyRow(block=T, max_abs_diff=diff,
                                     tolerance=tol, passed=diff <= tol))
    return report


# ---------------------------------------------------------------------------
# timing


@dataclass
class BenchResult:
    records: list = field(default_factory=list)
    summaries: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    threads: int = 1


def _run_plan(cfg: RnnConfig, t_list):
    if cfg.kind is CellKind.LSTM:
        return [("stepwise", 1)]
    return [("blocked", T) for T in t_list]


def bench(cfg: RnnConfig, weights: WeightSet, X, t_list, repeats: int = 5,
          threads: int = 1, warmup: int = 1) -> BenchResult:
    """Timed runs for every (impl, block) of the plan, plus the summary."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    result = BenchResult(threads=set_compute_threads(threads))
    resolution = time.get_clock_info("perf_counter").resolution or 1e-9
    cell = cfg.kind.value
    for impl, T in _run_plan(cfg, t_list):
        if impl == "stepwise":
            run = lambda: run_stepwise(cfg, weights, X, kernel="fast")
        else:
            run = lambda T=T: run_blocked(cfg, weights, X, T, kernel="fast")
        for _ in range(warmup):
            run()
        for rep in range(repeats):
            t0 = time.perf_counter()
            run()
            elapsed = time.perf_counter() - t0
            if resolution > 0.01 * elapsed:
                msg = (f"timer resolution {resolution:g}s exceeds 1% of a "
                       f"{cell} block={T} run ({elapsed:g}s)")
                if msg not in result.warnings:
                    result.warnings.append(msg)
            result.records.append(BenchRecord(
                cell=cell, impl=impl, d_in=cfg.d_in, d_h=cfg.d_h,
                seq_len=X.shape[0], block=T, threads=result.threads,
                repeat=rep, elapsed_ms=elapsed * 1e3))
    result.summaries = summarize(result.records)
    return result


def summarize(records) -> list:
    """Median per (cell, impl, block); speed-ups against the T=1 median."""
    groups = {}
    order = []
    for r in records:
        key = (r.cell, r.impl, r.block)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(r.elapsed_ms)
    medians = {key: statistics.median(v) for key, v in groups.items()}
    rows = []
    for cell, impl, block in order:
        med = medians[(cell, impl, block)]
        if impl == "stepwise":
            rows.append(SpeedupRow(label=cell.upper(), median_ms=med))
            continue
        base = medians.get((cell, impl, 1))
        pct = speedup(base, med) if base is not None else None
        rows.append(SpeedupRow(label=f"{cell.upper()}-{block}", median_ms=med,
                               speedup_pct=pct))
    return rows


# ---------------------------------------------------------------------------
# CSV emission

_RECORD_HEADER = ["cell", "impl", "d_in", "d_h", "seq_len", "block",
                  "threads", "repeat", "elapsed_ms"]
_SUMMARY_HEADER = ["label", "median_ms", "speedup_pct"]
_TRAFFIC_HEADER = ["cell", "d_h", "precision", "L", "T", "weight_bytes",
                   "blocks", "est_traffic_bytes", "ratio_vs_T1"]

_CSV_KINDS = {"records": _RECORD_HEADER, "summary": _SUMMARY_HEADER,
              "traffic": _TRAFFIC_HEADER}


def _csv_kind(row) -> str:
    if isinstance(row, BenchRecord):
        return "records"
    if isinstance(row, SpeedupRow):
        return "summary"
    if isinstance(row, TrafficReport):
        return "traffic"
    raise ValueError(f"no CSV layout for {type(row).__name__}")


def emit_csv(rows, path, kind: str = None) -> None:
    """Write records, summary rows, or traffic reports with a fixed header.

    An empty row list needs an explicit kind and produces a header-only
    file."""
    if kind is None:
        if not rows:
            raise ValueError("empty row list needs an explicit kind")
        kind = _csv_kind(rows[0])
    if kind not in _CSV_KINDS:
        raise ValueError(f"unknown CSV kind {kind!r}")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_CSV_KINDS[kind])
        for row in rows:
            if _csv_kind(row) != kind:
                raise ValueError("mixed row types in one CSV")
            if kind == "records":
                writer.writerow([row.cell, row.impl, row.d_in, row.d_h,
                                 row.seq_len, row.block, row.threads,
                                 row.repeat, repr(row.elapsed_ms)])
            elif kind == "summary":
                pct = "-" if row.speedup_pct is None else f"{row.speedup_pct:.1f}"
                writer.writerow([row.label, repr(row.median_ms), pct])
            else:
                writer.writerow([row.config.kind.value, row.config.d_h,
                                 row.config.precision, row.seq_len,
                                 row.block_size, row.weight_bytes, row.blocks,
                                 row.est_weight_traffic, repr(row.ratio_vs_t1)])


def format_summary_table(rows) -> str:
    lines = [f"{'Model':<12} {'Median (ms)':>12} {'Speed-up':>10}"]
    for r in rows:
        pct = "-" if r.speedup_pct is None else f"{r.speedup_pct:.1f}%"
        lines.append(f"{r.label:<12} {r.median_ms:>12.3f} {pct:>10}")
    return "\n".join(lines)
