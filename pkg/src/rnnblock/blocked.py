"""Blocked multi-time-step execution of SRU and QRNN layers.

A sequence is cut into blocks of up to T consecutive steps. Because SRU and
QRNN gates depend only on inputs, every gate value for a whole block comes
out of a handful of matrix-matrix products: each weight row fetched from
memory is reused for T time steps instead of one, which is the entire
point. The only serial work left is the cheap elementwise sweep that
propagates the memory cell c through the block, followed by a fully
parallel output mix.

The c carried into each block is the last column of the previous block, so
blocking is an execution tiling, not a semantic boundary; results match
``cells.run_stepwise`` to accumulation-order noise. The LSTM path can only
precompute its input-side products (its gates also need h_{t-1}), which is
provided here as ``lstm_run_precomputed``.

Every matrix product issued can be recorded in a ``KernelTrace`` (one event
per call with the operand sizes) so the analytical traffic model can be
validated against what actually ran.
"""

from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .cells import CellKind, LstmWeights, QrnnWeights, SruWeights
from .kernels import gemm, gemv, sigmoid, tanh_act


@dataclass(frozen=True)
class BlockPlan:
    seq_len: int
    block_size: int
    blocks: tuple  # ordered (start, length) ranges tiling [0, seq_len)


def plan_blocks(seq_len: int, block_size: int) -> BlockPlan:
    """ceil(seq_len / block_size) blocks; the last one takes the remainder."""
    if seq_len < 1:
        raise ValueError("seq_len must be >= 1")
    if block_size < 1:
        raise ValueError("block_size must be >= 1")
    blocks = []
    start = 0
    while start < seq_len:
        length = min(block_size, seq_len - start)
        blocks.append((start, length))
        start += length
    return BlockPlan(seq_len=seq_len, block_size=block_size, blocks=tuple(blocks))


@dataclass
class GateBlock:
    """Per-block gate values, one column per time step.

    cand is the candidate x-hat (linear for SRU, tanh-activated for QRNN),
    forget the forget gate, out_gate the highway gate (SRU) or output gate
    (QRNN)."""

    cand: np.ndarray
    forget: np.ndarray
    out_gate: np.ndarray

    def __post_init__(self):
        if not (self.cand.shape == self.forget.shape == self.out_gate.shape):
            raise ValueError("gate matrices must share one shape")

    @property
    def length(self):
        return self.cand.shape[1]


@dataclass(frozen=True)
class TraceEvent:
    phase: str
    m: int
    k: int
    n: int

    def line(self) -> str:
        return f"{self.phase},{self.m},{self.k},{self.n}"


@dataclass
class KernelTrace:
    """Call log of the weight-touching operations of a run."""

    events: list = field(default_factory=list)

    def add(self, phase: str, m: int, k: int, n: int) -> None:
        self.events.append(TraceEvent(phase, m, k, n))

    def lines(self):
        return [e.line() for e in self.events]

    def count(self, phase: str) -> int:
        return sum(1 for e in self.events if e.phase == phase)

    def touches(self, phase: str = None) -> int:
        """Weight elements fetched: sum of m*k over matching events."""
        return sum(e.m * e.k for e in self.events
                   if phase is None or e.phase == phase)


PHASE_GEMM = "precompute.gemm"
PHASE_BIAS = "precompute.bias"
PHASE_GEMV = "recurrent.gemv"


def _gate_gemm(W, Xb, kernel, trace):
    if trace is not None:
        trace.add(PHASE_GEMM, W.shape[0], W.shape[1], Xb.shape[1])
    return gemm(W, Xb, kernel)


def _add_bias(lin, b, trace):
    if trace is not None:
        trace.add(PHASE_BIAS, b.shape[0], 1, lin.shape[1])
    return lin + b[:, None]


def precompute_gates_sru(w: SruWeights, Xb: np.ndarray, kernel: str = "fast",
                         trace: KernelTrace = None) -> GateBlock:
    """Gate values for a block of inputs (columns of Xb), three products."""
    if Xb.ndim != 2 or Xb.shape[0] != w.d_in:
        raise ValueError(f"input block must be [{w.d_in} x T], got {Xb.shape}")
    cand = _gate_gemm(w.w_cand, Xb, kernel, trace)
    f = sigmoid(_add_bias(_gate_gemm(w.w_forget, Xb, kernel, trace), w.b_forget, trace))
    r = sigmoid(_add_bias(_gate_gemm(w.w_highway, Xb, kernel, trace), w.b_highway, trace))
    return GateBlock(cand=cand, forget=f, out_gate=r)


def precompute_gates_qrnn(w: QrnnWeights, Xb: np.ndarray, x_carry: np.ndarray,
                          kernel: str = "fast", trace: KernelTrace = None) -> GateBlock:
    """Two-tap gate values for a block; x_carry is the input just before it
    (zero for the first block)."""
    if Xb.ndim != 2 or Xb.shape[0] != w.d_in:
        raise ValueError(f"input block must be [{w.d_in} x T], got {Xb.shape}")
    if x_carry.shape != (w.d_in,):
        raise ValueError(f"x_carry must have length {w.d_in}")
    # previous-input tap: columns shifted right by one, carry in front
    Xprev = np.ascontiguousarray(np.concatenate([x_carry[:, None], Xb[:, :-1]], axis=1))
    cand = tanh_act(_gate_gemm(w.w_cand, Xb, kernel, trace)
                    + _gate_gemm(w.w_cand_prev, Xprev, kernel, trace))
    f = sigmoid(_gate_gemm(w.w_forget, Xb, kernel, trace)
                + _gate_gemm(w.w_forget_prev, Xprev, kernel, trace))
    o = sigmoid(_gate_gemm(w.w_out, Xb, kernel, trace)
                + _gate_gemm(w.w_out_prev, Xprev, kernel, trace))
    return GateBlock(cand=cand, forget=f, out_gate=o)


@njit(parallel=True, cache=True)
def _sweep(F, Xh, c0, C):
    d, T = F.shape
    one = np.float32(1.0)
    for i in prange(d):
        c = c0[i]
        for t in range(T):
            f = F[i, t]
            c = f * c + (one - f) * Xh[i, t]
            C[i, t] = c


def recurrence_sweep(forget: np.ndarray, cand: np.ndarray, c_init: np.ndarray) -> np.ndarray:
    """Resolve c_t = f_t*c_{t-1} + (1-f_t)*cand_t across the block.

    Column t holds c_t. Sequential over columns, elementwise parallel
    within one (the lanes are independent)."""
    if forget.ndim != 2 or forget.shape != cand.shape:
        raise ValueError("forget and candidate blocks must share one 2-d shape")
    if c_init.shape != (forget.shape[0],):
        raise ValueError("c_init length must match the block height")
    C = np.empty_like(forget)
    _sweep(forget, cand, c_init, C)
    return C


def finalize_outputs(kind: CellKind, gates: GateBlock, C: np.ndarray,
                     Xb: np.ndarray = None) -> np.ndarray:
    """Mix the resolved memory cells into outputs; no step dependencies."""
    if C.shape != gates.cand.shape:
        raise ValueError("memory-cell block shape does not match the gates")
    if kind is CellKind.QRNN:
        return gates.out_gate * tanh_act(C)
    if kind is CellKind.SRU:
        if Xb is None:
            raise ValueError("SRU output needs the raw input block")
        if Xb.shape != C.shape:
            raise ValueError("input block shape does not match")
        one_minus_r = 1.0 - gates.out_gate
        return gates.out_gate * tanh_act(C) + one_minus_r * Xb
    raise ValueError(f"no blocked output path for {kind}")


def _stacked(ws, names):
    return np.ascontiguousarray(np.concatenate([getattr(ws, n) for n in names], axis=0))


def _sru_gates_stacked(w, Wstack, Xb, kernel, trace):
    d_h = w.d_h
    lin = _gate_gemm(Wstack, Xb, kernel, trace)
    cand = lin[:d_h]
    f = sigmoid(_add_bias(np.ascontiguousarray(lin[d_h:2 * d_h]), w.b_forget, trace))
    r = sigmoid(_add_bias(np.ascontiguousarray(lin[2 * d_h:]), w.b_highway, trace))
    return GateBlock(cand=np.ascontiguousarray(cand), forget=f, out_gate=r)


def _qrnn_gates_stacked(w, Wcur, Wprev, Xb, x_carry, kernel, trace):
    d_h = w.d_h
    Xprev = np.ascontiguousarray(np.concatenate([x_carry[:, None], Xb[:, :-1]], axis=1))
    lin = _gate_gemm(Wcur, Xb, kernel, trace) + _gate_gemm(Wprev, Xprev, kernel, trace)
    cand = tanh_act(lin[:d_h])
    f = sigmoid(lin[d_h:2 * d_h])
    o = sigmoid(lin[2 * d_h:])
    return GateBlock(cand=np.ascontiguousarray(cand),
                     forget=np.ascontiguousarray(f),
                     out_gate=np.ascontiguousarray(o))


def run_blocked(cfg, weights, X: np.ndarray, block_size: int,
                kernel: str = "fast", trace: KernelTrace = None,
                stack_gates: bool = False) -> np.ndarray:
    """Blocked execution of the whole network; returns [L x d_h].

    Per block: one gate-precompute pass (pure matrix products), one
    recurrence sweep carrying c across block boundaries, one output mix.
    stack_gates fuses the per-gate products into one taller product per
    input tap; the math is identical, the call count smaller.
    """
    if cfg.kind not in (CellKind.SRU, CellKind.QRNN):
        raise ValueError("blocked execution covers SRU and QRNN; "
                         "use lstm_run_precomputed for LSTM")
    if X.ndim != 2 or X.shape[1] != cfg.d_in:
        raise ValueError(f"input must be [L x {cfg.d_in}], got {X.shape}")
    plan = plan_blocks(X.shape[0], block_size)
    layer_in = X
    for w in weights.layers:
        stacked_cur = stacked_prev = None
        if stack_gates:
            if cfg.kind is CellKind.SRU:
                stacked_cur = _stacked(w, ("w_cand", "w_forget", "w_highway"))
            else:
                stacked_cur = _stacked(w, ("w_cand", "w_forget", "w_out"))
                stacked_prev = _stacked(w, ("w_cand_prev", "w_forget_prev", "w_out_prev"))
        layer_out = np.empty((plan.seq_len, w.d_h), layer_in.dtype)
        c = np.zeros(w.d_h, layer_in.dtype)
        x_carry = np.zeros(w.d_in, layer_in.dtype)
        for start, length in plan.blocks:
            Xb = np.ascontiguousarray(layer_in[start:start + length].T)
            if cfg.kind is CellKind.SRU:
                if stack_gates:
                    gates = _sru_gates_stacked(w, stacked_cur, Xb, kernel, trace)
                else:
                    gates = precompute_gates_sru(w, Xb, kernel, trace)
            else:
                if stack_gates:
                    gates = _qrnn_gates_stacked(w, stacked_cur, stacked_prev,
                                                Xb, x_carry, kernel, trace)
                else:
                    gates = precompute_gates_qrnn(w, Xb, x_carry, kernel, trace)
                x_carry = Xb[:, -1].copy()
            C = recurrence_sweep(gates.forget, gates.cand, c)
            c = C[:, -1].copy()
            H = finalize_outputs(cfg.kind, gates, C, Xb if cfg.kind is CellKind.SRU else None)
            layer_out[start:start + length] = H.T
        layer_in = layer_out
    return layer_in


def lstm_run_precomputed(w: LstmWeights, X: np.ndarray, block_size: int,
                         kernel: str = "fast", trace: KernelTrace = None) -> np.ndarray:
    """LSTM with the input-side products batched per block.

    The four W x_t products (plus biases) for a whole block are computed
    as matrix products up front; the four recurrent U h_{t-1} products
    stay inside the step loop because nothing can move them out. That
    halves the weight traffic at best, it cannot do better.
    """
    if X.ndim != 2 or X.shape[1] != w.d_in:
        raise ValueError(f"input must be [L x {w.d_in}], got {X.shape}")
    plan = plan_blocks(X.shape[0], block_size)
    dtype = X.dtype
    h = np.zeros(w.d_h, dtype)
    c = np.zeros(w.d_h, dtype)
    out = np.empty((plan.seq_len, w.d_h), dtype)
    for start, length in plan.blocks:
        Xb = np.ascontiguousarray(X[start:start + length].T)
        # transposed so each step reads one contiguous row
        gf = _add_bias(_gate_gemm(w.w_forget, Xb, kernel, trace), w.b_forget, trace).T.copy()
        gi = _add_bias(_gate_gemm(w.w_input, Xb, kernel, trace), w.b_input, trace).T.copy()
        go = _add_bias(_gate_gemm(w.w_output, Xb, kernel, trace), w.b_output, trace).T.copy()
        gc = _add_bias(_gate_gemm(w.w_cand, Xb, kernel, trace), w.b_cand, trace).T.copy()
        for t in range(length):
            if trace is not None:
                for _ in range(4):
                    trace.add(PHASE_GEMV, w.d_h, w.d_h, 1)
            f = sigmoid(gf[t] + gemv(w.u_forget, h, kernel))
            i = sigmoid(gi[t] + gemv(w.u_input, h, kernel))
            o = sigmoid(go[t] + gemv(w.u_output, h, kernel))
            cand = tanh_act(gc[t] + gemv(w.u_cand, h, kernel))
            c = f * c + i * cand
            h = o * tanh_act(c)
            out[start + t] = h
    return out
