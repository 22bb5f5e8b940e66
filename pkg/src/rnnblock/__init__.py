"""Multi-time-step blocked inference for SRU, QRNN, and LSTM cells.

Single-stream recurrent inference is memory-bound: every step re-reads
the full weight set for a handful of arithmetic operations. For cells
whose gates do not depend on the previous output (SRU, QRNN) the gate
computation of T consecutive steps can be batched into matrix-matrix
products, so each weight fetch serves T steps; only a cheap elementwise
recurrence remains serial. This package provides the cells, the blocked
executor, reference kernels to verify it against, an analytical weight
traffic model, and a benchmark harness.
"""

from .bench import (
    BenchRecord,
    BenchResult,
    SpeedupRow,
    bench,
    emit_csv,
    speedup,
    summarize,
    verify,
)
from .blocked import (
    BlockPlan,
    GateBlock,
    KernelTrace,
    finalize_outputs,
    lstm_run_precomputed,
    plan_blocks,
    precompute_gates_qrnn,
    precompute_gates_sru,
    recurrence_sweep,
    run_blocked,
)
from .cells import (
    CellKind,
    CellState,
    LstmWeights,
    QrnnWeights,
    SruWeights,
    lstm_step,
    qrnn_step,
    run_stepwise,
    sru_step,
    zero_state,
)
from .kernels import Rng64, gemm, gemv, sigmoid, tanh_act, uniform_weight
from .model_io import (
    PRESETS,
    RnnConfig,
    WeightSet,
    count_params,
    generate_sequence,
    generate_weights,
    load_sequence,
    load_weights,
    preset_config,
    save_sequence,
    save_weights,
)
from .traffic import TrafficReport, estimate_traffic, validate_against_trace, weight_bytes

__version__ = "0.1.0"
