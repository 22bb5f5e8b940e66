"""Analytical estimator of DRAM weight traffic under blocked execution.

The model is deliberately minimal: it counts weight bytes only and assumes
the cache retains nothing across blocks, so every block fetches the full
parameter set once. Activations are ignored (they are O(L*d) against
O(d^2) per block for the weights, and the whole argument for blocking is
about weights). Under those assumptions SRU/QRNN traffic for a sequence is
weight_bytes * ceil(L/T): blocking by T divides weight traffic by T. The
LSTM variant can only batch its input-side products, so its recurrent
matrices are re-fetched every step and the reduction saturates at
u_bytes / (w_bytes + u_bytes), about one half when d_in == d_h.

Because real caches do retain weights between nearby blocks, measured
speed-ups fall short of 1/T and flatten for large T; the model value is an
upper bound on the reduction, never a wall-clock prediction.
"""

from dataclasses import dataclass

import numpy as np

from .blocked import PHASE_BIAS, PHASE_GEMM, PHASE_GEMV, KernelTrace, plan_blocks
from .cells import CellKind
from .model_io import RnnConfig, count_params

MODEL_ASSUMPTION = ("weights only, cold cache per block: every block fetches "
                    "the full parameter set from DRAM once")


@dataclass(frozen=True)
class TrafficReport:
    config: RnnConfig
    seq_len: int
    block_size: int
    weight_bytes: int
    blocks: int
    est_weight_traffic: int
    per_step_traffic: float
    ratio_vs_t1: float
    assumption: str = MODEL_ASSUMPTION


def element_size(cfg: RnnConfig) -> int:
    return np.dtype(cfg.dtype).itemsize


def weight_bytes(cfg: RnnConfig) -> int:
    return count_params(cfg) * element_size(cfg)


def lstm_split_bytes(cfg: RnnConfig) -> tuple:
    """(input-side bytes incl. biases, recurrent bytes) across layers."""
    if cfg.kind is not CellKind.LSTM:
        raise ValueError("split applies to LSTM only")
    esize = element_size(cfg)
    w = u = 0
    for layer in range(cfg.n_layers):
        d_in, d_h = cfg.layer_dims(layer)
        w += (4 * d_h * d_in + 4 * d_h) * esize
        u += 4 * d_h * d_h * esize
    return w, u


def _estimate(cfg: RnnConfig, seq_len: int, blocks: int) -> int:
    if cfg.kind is CellKind.LSTM:
        w, u = lstm_split_bytes(cfg)
        return w * blocks + u * seq_len
    return weight_bytes(cfg) * blocks


def estimate_traffic(cfg: RnnConfig, seq_len: int, block_size: int) -> TrafficReport:
    """Estimated weight traffic for one sequence at the given block size."""
    if seq_len < 1:
        raise ValueError("seq_len must be >= 1")
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    blocks = len(plan_blocks(seq_len, block_size).blocks)
    est = _estimate(cfg, seq_len, blocks)
    base = _estimate(cfg, seq_len, seq_len)  # T = 1: one block per step
    return TrafficReport(
        config=cfg,
        seq_len=seq_len,
        block_size=block_size,
        weight_bytes=weight_bytes(cfg),
        blocks=blocks,
        est_weight_traffic=est,
        per_step_traffic=est / seq_len,
        ratio_vs_t1=est / base,
    )


def expected_phase_touches(cfg: RnnConfig, seq_len: int, block_size: int) -> dict:
    """Weight elements each phase should fetch under the model."""
    blocks = len(plan_blocks(seq_len, block_size).blocks)
    gemm = bias = gemv = 0
    for layer in range(cfg.n_layers):
        d_in, d_h = cfg.layer_dims(layer)
        if cfg.kind is CellKind.SRU:
            gemm += 3 * d_h * d_in * blocks
            bias += 2 * d_h * blocks
        elif cfg.kind is CellKind.QRNN:
            gemm += 6 * d_h * d_in * blocks
        else:
            gemm += 4 * d_h * d_in * blocks
            bias += 4 * d_h * blocks
            gemv += 4 * d_h * d_h * seq_len
    return {PHASE_GEMM: gemm, PHASE_BIAS: bias, PHASE_GEMV: gemv}


@dataclass(frozen=True)
class TraceComparison:
    ok: bool
    expected: dict
    actual: dict
    first_divergent_phase: str
    expected_touches: int
    actual_touches: int


def validate_against_trace(report: TrafficReport, trace: KernelTrace) -> TraceComparison:
    """Check that the instrumented run touched exactly the weight elements
    the model predicts, phase by phase."""
    expected = expected_phase_touches(report.config, report.seq_len, report.block_size)
    actual = {phase: trace.touches(phase) for phase in (PHASE_GEMM, PHASE_BIAS, PHASE_GEMV)}
    divergent = None
    for phase in (PHASE_GEMM, PHASE_BIAS, PHASE_GEMV):
        if expected[phase] != actual[phase]:
            divergent = phase
            break
    expected_total = report.est_weight_traffic // element_size(report.config)
    actual_total = sum(actual.values())
    ok = divergent is None and expected_total == actual_total
    return TraceComparison(
        ok=ok,
        expected=expected,
        actual=actual,
        first_divergent_phase=divergent,
        expected_touches=expected_total,
        actual_touches=actual_total,
    )
